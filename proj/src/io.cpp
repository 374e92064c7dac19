#include "cvgc/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cvgc {

namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

bool is_ply_magic(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 3);
    return std::strncmp(magic, "ply", 3) == 0;
}

}  // namespace

CloudFileFormat infer_format(const std::string& path, bool for_reading) {
    const std::string ext = lower_ext(path);
    if (ext == "ply") {
        if (!for_reading) return CloudFileFormat::PLY_BINARY_LE;
        std::ifstream in(path, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("format", 0) == 0) {
                if (line.find("ascii") != std::string::npos)
                    return CloudFileFormat::PLY_ASCII;
                if (line.find("binary_little_endian") != std::string::npos)
                    return CloudFileFormat::PLY_BINARY_LE;
                throw ParseError(path + ": unsupported PLY format: " + line);
            }
            if (line.rfind("end_header", 0) == 0) break;
        }
        return CloudFileFormat::PLY_BINARY_LE;
    }
    if (ext == "xyz" || ext == "xyzl" || ext == "txt" || ext.empty())
        return CloudFileFormat::XYZL_ASCII;
    if (for_reading && is_ply_magic(path)) return CloudFileFormat::PLY_ASCII;
    return CloudFileFormat::XYZL_ASCII;
}

namespace {

PointCloud read_xyzl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    int arity = 0;  // 3 or 4 once fixed
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Point3 p;
        ls >> p.x >> p.y >> p.z;
        if (ls.fail())
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed line");
        long long label = -1;
        const bool has_label = static_cast<bool>(ls >> label);
        std::string trailing;
        if (ls >> trailing)
            throw ParseError(path + ":" + std::to_string(line_no) + ": trailing fields");
        const int row_arity = has_label ? 4 : 3;
        if (arity == 0) {
            arity = row_arity;
            if (arity == 4) cloud.labels.emplace();
        } else if (arity != row_arity) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": mixed labeled/unlabeled rows");
        }
        if (has_label && label < 0)
            throw ParseError(path + ":" + std::to_string(line_no) + ": negative label");
        cloud.points.push_back(p);
        if (cloud.labels) cloud.labels->push_back(static_cast<Label>(label));
    }
    return cloud;
}

void write_xyzl(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    char buf[160];
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        const Point3& p = cloud.points[j];
        int n = std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g", p.x, p.y, p.z);
        if (cloud.labels)
            n += std::snprintf(buf + n, sizeof(buf) - n, " %u", (*cloud.labels)[j]);
        buf[n++] = '\n';
        out.write(buf, n);
    }
    if (!out) throw IoError("write failed: " + path);
}

struct PlyProperty {
    std::string type;
    std::string name;
    bool is_list = false;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

std::size_t scalar_size(const std::string& type) {
    if (type == "char" || type == "int8" || type == "uchar" || type == "uint8")
        return 1;
    if (type == "short" || type == "int16" || type == "ushort" || type == "uint16")
        return 2;
    if (type == "int" || type == "int32" || type == "uint" || type == "uint32" ||
        type == "float" || type == "float32")
        return 4;
    if (type == "double" || type == "float64" || type == "int64" || type == "uint64")
        return 8;
    throw ParseError("unknown PLY property type: " + type);
}

double read_binary_scalar(std::istream& in, const std::string& type) {
    unsigned char raw[8];
    const std::size_t n = scalar_size(type);
    in.read(reinterpret_cast<char*>(raw), static_cast<std::streamsize>(n));
    if (!in) throw ParseError("unexpected end of PLY payload");
    auto le = [&](auto value) {
        std::memcpy(&value, raw, sizeof(value));
        return static_cast<double>(value);
    };
    if (type == "char" || type == "int8") return le(std::int8_t{});
    if (type == "uchar" || type == "uint8") return le(std::uint8_t{});
    if (type == "short" || type == "int16") return le(std::int16_t{});
    if (type == "ushort" || type == "uint16") return le(std::uint16_t{});
    if (type == "int" || type == "int32") return le(std::int32_t{});
    if (type == "uint" || type == "uint32") return le(std::uint32_t{});
    if (type == "float" || type == "float32") return le(float{});
    if (type == "int64") return le(std::int64_t{});
    if (type == "uint64") return le(std::uint64_t{});
    return le(double{});
}

bool is_label_name(const std::string& name) {
    return name == "label" || name == "class" || name == "scalar_label";
}

PointCloud read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);

    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) throw ParseError(path + ": truncated PLY header");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        return line;
    };

    if (next_line() != "ply") throw ParseError(path + ": missing ply magic");
    bool ascii = false;
    std::vector<PlyElement> elements;
    for (;;) {
        next_line();
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) continue;
        if (keyword == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") ascii = true;
            else if (fmt == "binary_little_endian") ascii = false;
            else throw ParseError(path + ":" + std::to_string(line_no) +
                                  ": unsupported format " + fmt);
        } else if (keyword == "element") {
            PlyElement el;
            ls >> el.name >> el.count;
            if (ls.fail())
                throw ParseError(path + ":" + std::to_string(line_no) + ": bad element");
            elements.push_back(el);
        } else if (keyword == "property") {
            if (elements.empty())
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": property before element");
            PlyProperty prop;
            ls >> prop.type;
            if (prop.type == "list") {
                prop.is_list = true;
                std::string count_type, value_type;
                ls >> count_type >> value_type >> prop.name;
            } else {
                ls >> prop.name;
            }
            if (ls.fail())
                throw ParseError(path + ":" + std::to_string(line_no) + ": bad property");
            elements.back().properties.push_back(prop);
        } else if (keyword == "end_header") {
            break;
        } else {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": unknown header keyword " + keyword);
        }
    }

    PointCloud cloud;
    bool saw_vertex = false;
    for (const PlyElement& el : elements) {
        const bool is_vertex = el.name == "vertex" && !saw_vertex;
        int ix = -1, iy = -1, iz = -1, ilabel = -1;
        if (is_vertex) {
            for (std::size_t t = 0; t < el.properties.size(); ++t) {
                const PlyProperty& prop = el.properties[t];
                if (prop.name == "x") ix = static_cast<int>(t);
                else if (prop.name == "y") iy = static_cast<int>(t);
                else if (prop.name == "z") iz = static_cast<int>(t);
                else if (is_label_name(prop.name)) ilabel = static_cast<int>(t);
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw ParseError(path + ": vertex element lacks x/y/z properties");
            saw_vertex = true;
            cloud.points.reserve(el.count);
            if (ilabel >= 0) cloud.labels.emplace();
        }
        for (const PlyProperty& prop : el.properties)
            if (prop.is_list && (is_vertex || &el != &elements.back()))
                throw ParseError(path + ": list properties are not supported in element " +
                                 el.name);
        if (!is_vertex && &el == &elements.back()) break;  // nothing left to read

        for (std::size_t row = 0; row < el.count; ++row) {
            std::vector<double> values(el.properties.size());
            if (ascii) {
                next_line();
                std::istringstream ls(line);
                for (std::size_t t = 0; t < el.properties.size(); ++t) ls >> values[t];
                if (ls.fail())
                    throw ParseError(path + ":" + std::to_string(line_no) +
                                     ": malformed " + el.name + " row");
            } else {
                for (std::size_t t = 0; t < el.properties.size(); ++t)
                    values[t] = read_binary_scalar(in, el.properties[t].type);
            }
            if (is_vertex) {
                cloud.points.push_back({values[ix], values[iy], values[iz]});
                if (ilabel >= 0)
                    cloud.labels->push_back(static_cast<Label>(values[ilabel]));
            }
        }
    }
    if (!saw_vertex) throw ParseError(path + ": no vertex element");
    return cloud;
}

void write_ply(const PointCloud& cloud, const std::string& path, bool ascii) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian")
        << " 1.0\nelement vertex " << cloud.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n";
    if (cloud.labels) out << "property int label\n";
    out << "end_header\n";

    for (std::size_t j = 0; j < cloud.size(); ++j) {
        const float x = static_cast<float>(cloud.points[j].x);
        const float y = static_cast<float>(cloud.points[j].y);
        const float z = static_cast<float>(cloud.points[j].z);
        if (ascii) {
            char buf[160];
            int n = std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g",
                                  static_cast<double>(x), static_cast<double>(y),
                                  static_cast<double>(z));
            if (cloud.labels)
                n += std::snprintf(buf + n, sizeof(buf) - n, " %u", (*cloud.labels)[j]);
            buf[n++] = '\n';
            out.write(buf, n);
        } else {
            out.write(reinterpret_cast<const char*>(&x), 4);
            out.write(reinterpret_cast<const char*>(&y), 4);
            out.write(reinterpret_cast<const char*>(&z), 4);
            if (cloud.labels) {
                const std::int32_t l = static_cast<std::int32_t>((*cloud.labels)[j]);
                out.write(reinterpret_cast<const char*>(&l), 4);
            }
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace

PointCloud read_cloud(const std::string& path, std::optional<CloudFileFormat> format) {
    const CloudFileFormat fmt = format ? *format : infer_format(path, true);
    PointCloud cloud = fmt == CloudFileFormat::XYZL_ASCII ? read_xyzl(path)
                                                          : read_ply(path);
    cloud.validate();
    return cloud;
}

bool write_cloud(const PointCloud& cloud, const std::string& path,
                 std::optional<CloudFileFormat> format) {
    cloud.validate();
    const CloudFileFormat fmt = format ? *format : infer_format(path, false);
    switch (fmt) {
        case CloudFileFormat::XYZL_ASCII: write_xyzl(cloud, path); break;
        case CloudFileFormat::PLY_ASCII: write_ply(cloud, path, true); break;
        case CloudFileFormat::PLY_BINARY_LE: write_ply(cloud, path, false); break;
    }
    return !cloud.has_features();  // features are not representable on disk
}

LabelMap read_label_map(const std::string& path, Label ignore_id) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    LabelMap map;
    map.ignore_id = ignore_id;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Label src, dst;
        ls >> src >> dst;
        if (ls.fail())
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'src dst'");
        map.mapping[src] = dst;
    }
    return map;
}

RunConfig RunConfig::preset(const std::string& name) {
    RunConfig cfg;
    if (name == "group1" || name.empty()) return cfg;
    if (name == "group2") {
        cfg.patch = 50.0;
        cfg.segmentation_voxel = 0.3;
        return cfg;
    }
    throw InvalidArgument("unknown preset: " + name);
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "preset") {
                const RunConfig p = preset(value);
                cfg.patch = p.patch;
                cfg.segmentation_voxel = p.segmentation_voxel;
            } else if (key == "spacing_min") cfg.cga.spacing_min = std::stod(value);
            else if (key == "spacing_max") cfg.cga.spacing_max = std::stod(value);
            else if (key == "angular_resolution")
                cfg.cga.angular_resolution = std::stod(value);
            else if (key == "densify_radius_scale")
                cfg.cga.densify_radius_scale = std::stod(value);
            else if (key == "normal_k") cfg.cga.normal_k = std::stoul(value);
            else if (key == "mode") cfg.cga.mode = parse_cga_mode(value);
            else if (key == "view_heights") {
                cfg.cga.view_heights.clear();
                std::istringstream hs(value);
                std::string tok;
                while (std::getline(hs, tok, ','))
                    cfg.cga.view_heights.push_back(std::stod(tok));
            } else if (key == "occupancy_voxel") cfg.occupancy_voxel = std::stod(value);
            else if (key == "aggregation_k") cfg.aggregation_k = std::stoul(value);
            else if (key == "aggregation_eps") cfg.aggregation_eps = std::stod(value);
            else if (key == "patch") cfg.patch = std::stod(value);
            else if (key == "overlap") cfg.overlap = std::stod(value);
            else if (key == "segmentation_voxel") cfg.segmentation_voxel = std::stod(value);
            else if (key == "label_map_path") cfg.label_map_path = value;
            else throw ParseError(path + ":" + std::to_string(line_no) +
                                  ": unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad value for " + key);
        }
    }
    return cfg;
}

}  // namespace cvgc
