#include "recon/ply.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace recon {

namespace {

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

size_t type_size(PlyType t) {
    switch (t) {
        case PlyType::I8:
        case PlyType::U8: return 1;
        case PlyType::I16:
        case PlyType::U16: return 2;
        case PlyType::I32:
        case PlyType::U32:
        case PlyType::F32: return 4;
        case PlyType::F64: return 8;
    }
    return 0;
}

PlyType parse_type(const std::string& s) {
    static const std::unordered_map<std::string, PlyType> map = {
        {"char", PlyType::I8},     {"int8", PlyType::I8},
        {"uchar", PlyType::U8},    {"uint8", PlyType::U8},
        {"short", PlyType::I16},   {"int16", PlyType::I16},
        {"ushort", PlyType::U16},  {"uint16", PlyType::U16},
        {"int", PlyType::I32},     {"int32", PlyType::I32},
        {"uint", PlyType::U32},    {"uint32", PlyType::U32},
        {"float", PlyType::F32},   {"float32", PlyType::F32},
        {"double", PlyType::F64},  {"float64", PlyType::F64},
    };
    auto it = map.find(s);
    if (it == map.end()) throw DataError("ply: unknown property type '" + s + "'");
    return it->second;
}

struct Property {
    std::string name;
    PlyType type = PlyType::F32;
    bool is_list = false;
    PlyType count_type = PlyType::U8;
};

struct Element {
    std::string name;
    size_t count = 0;
    std::vector<Property> props;
};

double read_binary_scalar(std::istream& in, PlyType t) {
    char buf[8];
    in.read(buf, std::streamsize(type_size(t)));
    if (!in) throw DataError("ply: truncated binary payload");
    switch (t) {
        case PlyType::I8: return *reinterpret_cast<int8_t*>(buf);
        case PlyType::U8: return *reinterpret_cast<uint8_t*>(buf);
        case PlyType::I16: { int16_t v; std::memcpy(&v, buf, 2); return v; }
        case PlyType::U16: { uint16_t v; std::memcpy(&v, buf, 2); return v; }
        case PlyType::I32: { int32_t v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::U32: { uint32_t v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::F32: { float v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::F64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0;
}

double read_ascii_scalar(std::istream& in) {
    double v;
    if (!(in >> v)) throw DataError("ply: truncated ascii payload");
    return v;
}

void write_f32(std::ostream& out, float v) { out.write(reinterpret_cast<char*>(&v), 4); }
void write_u8(std::ostream& out, uint8_t v) { out.write(reinterpret_cast<char*>(&v), 1); }
void write_i32(std::ostream& out, int32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }

}  // namespace

PlyData load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("ply: cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply")
        throw DataError("ply: missing magic in " + path);

    bool binary = false;
    std::vector<Element> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") binary = false;
            else if (fmt == "binary_little_endian") binary = true;
            else throw DataError("ply: unsupported format '" + fmt + "'");
        } else if (kw == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (kw == "property") {
            if (elements.empty()) throw DataError("ply: property before element");
            std::string t;
            ls >> t;
            Property p;
            if (t == "list") {
                std::string ct, vt;
                ls >> ct >> vt >> p.name;
                p.is_list = true;
                p.count_type = parse_type(ct);
                p.type = parse_type(vt);
            } else {
                p.type = parse_type(t);
                ls >> p.name;
            }
            elements.back().props.push_back(p);
        } else if (kw == "end_header") {
            break;
        } else {
            throw DataError("ply: unexpected header keyword '" + kw + "'");
        }
    }

    PlyData out;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
            int ir = -1, ig = -1, ib = -1, istage = -1;
            for (size_t p = 0; p < e.props.size(); ++p) {
                if (e.props[p].is_list)
                    throw DataError("ply: list property on vertex element");
                const std::string& n = e.props[p].name;
                if (n == "x") ix = int(p);
                else if (n == "y") iy = int(p);
                else if (n == "z") iz = int(p);
                else if (n == "nx") inx = int(p);
                else if (n == "ny") iny = int(p);
                else if (n == "nz") inz = int(p);
                else if (n == "red") ir = int(p);
                else if (n == "green") ig = int(p);
                else if (n == "blue") ib = int(p);
                else if (n == "stage") istage = int(p);
            }
            if (e.count > 0 && (ix < 0 || iy < 0 || iz < 0))
                throw DataError("ply: vertex element lacks x/y/z");
            out.cloud.points.reserve(e.count);
            std::vector<double> row(e.props.size());
            for (size_t v = 0; v < e.count; ++v) {
                for (size_t p = 0; p < e.props.size(); ++p)
                    row[p] = binary ? read_binary_scalar(in, e.props[p].type)
                                    : read_ascii_scalar(in);
                out.cloud.points.push_back({row[ix], row[iy], row[iz]});
                if (inx >= 0) out.cloud.normals.push_back({row[inx], row[iny], row[inz]});
                if (ir >= 0)
                    out.cloud.colors.push_back({uint8_t(row[ir]), uint8_t(row[ig]),
                                                uint8_t(row[ib])});
                if (istage >= 0) out.cloud.stages.push_back(int(row[istage]));
            }
        } else if (e.name == "face") {
            for (size_t f = 0; f < e.count; ++f) {
                for (const auto& p : e.props) {
                    if (!p.is_list) {
                        if (binary) read_binary_scalar(in, p.type);
                        else read_ascii_scalar(in);
                        continue;
                    }
                    size_t n = size_t(binary ? read_binary_scalar(in, p.count_type)
                                             : read_ascii_scalar(in));
                    std::vector<uint32_t> idx(n);
                    for (size_t i = 0; i < n; ++i)
                        idx[i] = uint32_t(binary ? read_binary_scalar(in, p.type)
                                                 : read_ascii_scalar(in));
                    if (p.name == "vertex_indices" || p.name == "vertex_index") {
                        // fan-triangulate polygons
                        for (size_t i = 2; i < n; ++i)
                            out.faces.push_back({idx[0], idx[i - 1], idx[i]});
                    }
                }
            }
        } else {
            // skip unknown elements
            for (size_t v = 0; v < e.count; ++v)
                for (const auto& p : e.props) {
                    if (p.is_list) {
                        size_t n = size_t(binary ? read_binary_scalar(in, p.count_type)
                                                 : read_ascii_scalar(in));
                        for (size_t i = 0; i < n; ++i)
                            binary ? read_binary_scalar(in, p.type) : read_ascii_scalar(in);
                    } else {
                        binary ? read_binary_scalar(in, p.type) : read_ascii_scalar(in);
                    }
                }
        }
    }
    return out;
}

namespace {

void write_header(std::ostream& out, bool binary, size_t n_verts, bool normals,
                  bool colors, bool stages, size_t n_faces) {
    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << n_verts << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
    if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (stages) out << "property int stage\n";
    if (n_faces > 0) {
        out << "element face " << n_faces << "\n";
        out << "property list uchar int vertex_indices\n";
    }
    out << "end_header\n";
}

std::string f32_str(float v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", double(v));
    return buf;
}

}  // namespace

void save_ply(const std::string& path, const PointCloud& cloud, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("ply: cannot write " + path);
    bool normals = !cloud.normals.empty();
    bool colors = !cloud.colors.empty();
    bool stages = !cloud.stages.empty();
    write_header(out, binary, cloud.points.size(), normals, colors, stages, 0);
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        if (binary) {
            write_f32(out, float(p.x));
            write_f32(out, float(p.y));
            write_f32(out, float(p.z));
            if (normals)
                for (int a = 0; a < 3; ++a) write_f32(out, float(cloud.normals[i][a]));
            if (colors)
                for (int a = 0; a < 3; ++a) write_u8(out, cloud.colors[i][a]);
            if (stages) write_i32(out, cloud.stages[i]);
        } else {
            out << f32_str(float(p.x)) << ' ' << f32_str(float(p.y)) << ' '
                << f32_str(float(p.z));
            if (normals)
                for (int a = 0; a < 3; ++a) out << ' ' << f32_str(float(cloud.normals[i][a]));
            if (colors)
                for (int a = 0; a < 3; ++a) out << ' ' << int(cloud.colors[i][a]);
            if (stages) out << ' ' << cloud.stages[i];
            out << '\n';
        }
    }
}

void save_ply(const std::string& path, const TriMesh& mesh, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("ply: cannot write " + path);
    bool normals = !mesh.normals.empty();
    write_header(out, binary, mesh.vertices.size(), normals, false, false,
                 mesh.triangles.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& p = mesh.vertices[i];
        if (binary) {
            write_f32(out, float(p.x));
            write_f32(out, float(p.y));
            write_f32(out, float(p.z));
            if (normals)
                for (int a = 0; a < 3; ++a) write_f32(out, float(mesh.normals[i][a]));
        } else {
            out << f32_str(float(p.x)) << ' ' << f32_str(float(p.y)) << ' '
                << f32_str(float(p.z));
            if (normals)
                for (int a = 0; a < 3; ++a) out << ' ' << f32_str(float(mesh.normals[i][a]));
            out << '\n';
        }
    }
    for (const auto& t : mesh.triangles) {
        if (binary) {
            write_u8(out, 3);
            for (int a = 0; a < 3; ++a) write_i32(out, int32_t(t[a]));
        } else {
            out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
        }
    }
}

}  // namespace recon
