#include "meshadv/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace meshadv {

namespace {

std::string lower_ext(const std::string& path) {
    const auto pos = path.find_last_of('.');
    if (pos == std::string::npos) return {};
    std::string ext = path.substr(pos + 1);
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

void reject_binary(const std::string& path, const std::string& content) {
    const std::size_t probe = std::min<std::size_t>(content.size(), 4096);
    for (std::size_t i = 0; i < probe; ++i) {
        const unsigned char c = static_cast<unsigned char>(content[i]);
        if (c == 0 || (c < 9 && c != 0)) {
            throw MeshError(path + ": binary data detected; only ASCII OFF/OBJ are supported");
        }
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MeshError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw MeshError(path + ": read failure");
    return ss.str();
}

// Splits into non-empty lines with comments stripped. comment_char 0 disables.
struct LineReader {
    std::istringstream stream;
    char comment_char;
    int line_no = 0;

    LineReader(const std::string& content, char comment) : stream(content), comment_char(comment) {}

    bool next(std::string& out) {
        std::string line;
        while (std::getline(stream, line)) {
            ++line_no;
            if (comment_char != 0) {
                const auto pos = line.find(comment_char);
                if (pos != std::string::npos) line.erase(pos);
            }
            if (!line.empty() && line.back() == '\r') line.pop_back();
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) {
                    blank = false;
                    break;
                }
            if (blank) continue;
            out = line;
            return true;
        }
        return false;
    }
};

Mesh parse_off(const std::string& path, const std::string& content) {
    LineReader reader(content, '#');
    std::string line;
    if (!reader.next(line)) throw MeshError(path + ": empty OFF file");

    std::istringstream header(line);
    std::string magic;
    header >> magic;
    if (magic != "OFF") throw MeshError(path + ": missing OFF header");

    long nv = -1, nf = -1, ne = -1;
    if (!(header >> nv >> nf >> ne)) {
        // Counts on their own line.
        if (!reader.next(line)) throw MeshError(path + ": missing OFF count line");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne)) {
            throw MeshError(path + ": malformed OFF count line '" + line + "'");
        }
    }
    if (nv < 0 || nf < 0) throw MeshError(path + ": negative OFF counts");

    Mesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!reader.next(line)) {
            throw MeshError(path + ": declared " + std::to_string(nv) + " vertices but found " +
                            std::to_string(i));
        }
        std::istringstream vs(line);
        Vec3 v;
        std::string extra;
        // Exactly three coordinates per vertex line; a trailing field usually
        // means the vertex count was wrong and this is already a face line.
        if (!(vs >> v.x >> v.y >> v.z) || (vs >> extra)) {
            throw MeshError(path + ": declared " + std::to_string(nv) +
                            " vertices but line " + std::to_string(reader.line_no) +
                            " is not a vertex (found " + std::to_string(i) + " vertices)");
        }
        mesh.vertices.push_back(v);
    }
    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long i = 0; i < nf; ++i) {
        if (!reader.next(line)) {
            throw MeshError(path + ": declared " + std::to_string(nf) + " faces but found " +
                            std::to_string(i));
        }
        std::istringstream fs(line);
        long size = 0;
        if (!(fs >> size)) {
            throw MeshError(path + ": malformed face at line " + std::to_string(reader.line_no));
        }
        if (size != 3) {
            throw MeshError(path + ": face " + std::to_string(i) + " has " + std::to_string(size) +
                            " vertices; only triangles are supported");
        }
        std::array<int, 3> f{};
        if (!(fs >> f[0] >> f[1] >> f[2])) {
            throw MeshError(path + ": malformed face at line " + std::to_string(reader.line_no));
        }
        mesh.faces.push_back(f);
    }
    return mesh;
}

Mesh parse_obj(const std::string& path, const std::string& content) {
    LineReader reader(content, '#');
    Mesh mesh;
    std::string line;
    while (reader.next(line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z)) {
                throw MeshError(path + ": malformed vertex at line " +
                                std::to_string(reader.line_no));
            }
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string token;
            while (ls >> token) {
                // "i", "i/t", "i//n", "i/t/n" -- keep the first field.
                const auto slash = token.find('/');
                const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
                long v = 0;
                try {
                    v = std::stol(head);
                } catch (const std::exception&) {
                    throw MeshError(path + ": malformed face index '" + token + "' at line " +
                                    std::to_string(reader.line_no));
                }
                if (v <= 0) {
                    throw MeshError(path + ": unsupported OBJ index " + std::to_string(v) +
                                    " at line " + std::to_string(reader.line_no) +
                                    " (only positive 1-based indices)");
                }
                idx.push_back(static_cast<int>(v - 1));
            }
            if (idx.size() != 3) {
                throw MeshError(path + ": face " + std::to_string(mesh.faces.size()) + " has " +
                                std::to_string(idx.size()) +
                                " vertices; only triangles are supported");
            }
            mesh.faces.push_back({idx[0], idx[1], idx[2]});
        }
        // Everything else (vn, vt, g, o, s, usemtl, mtllib) is ignored.
    }
    return mesh;
}

}  // namespace

MeshFormat format_from_path(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "off") return MeshFormat::OFF;
    if (ext == "obj") return MeshFormat::OBJ;
    throw MeshError(path + ": unknown mesh extension '" + ext + "' (expected .off or .obj)");
}

void validate_mesh(const Mesh& mesh) {
    const int nv = mesh.vertex_count();
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        for (int k = 0; k < 3; ++k) {
            if (f[k] < 0 || f[k] >= nv) {
                throw MeshError("face " + std::to_string(i) + " references vertex " +
                                std::to_string(f[k]) + " out of range [0, " + std::to_string(nv) +
                                ")");
            }
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
            throw MeshError("face " + std::to_string(i) + " is degenerate (repeated vertex index)");
        }
    }
}

Mesh load_mesh(const std::string& path, MeshFormat format) {
    const std::string content = read_file(path);
    reject_binary(path, content);
    Mesh mesh = format == MeshFormat::OFF ? parse_off(path, content) : parse_obj(path, content);
    validate_mesh(mesh);
    return mesh;
}

Mesh load_mesh(const std::string& path) { return load_mesh(path, format_from_path(path)); }

void save_mesh(const Mesh& mesh, const std::string& path, MeshFormat format) {
    std::ofstream out(path);
    if (!out) throw MeshError(path + ": cannot open file for writing");
    char buf[96];
    if (format == MeshFormat::OFF) {
        out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
        for (const Vec3& v : mesh.vertices) {
            std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", v.x, v.y, v.z);
            out << buf;
        }
        for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    } else {
        for (const Vec3& v : mesh.vertices) {
            std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
            out << buf;
        }
        for (const auto& f : mesh.faces) {
            out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
        }
    }
    out.flush();
    if (!out) throw MeshError(path + ": write failure");
}

void save_mesh(const Mesh& mesh, const std::string& path) {
    save_mesh(mesh, path, format_from_path(path));
}

Adjacency build_adjacency(const Mesh& mesh) {
    validate_mesh(mesh);
    Adjacency adj;
    const int nv = mesh.vertex_count();
    adj.vertex_neighbors.assign(static_cast<std::size_t>(nv), {});

    struct EdgeInfo {
        std::vector<int> faces;
        int forward = 0;   // traversals as (v0 -> v1)
        int backward = 0;  // traversals as (v1 -> v0)
    };
    std::map<std::pair<int, int>, EdgeInfo> edge_map;  // keyed (min, max): canonical order
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const auto& f = mesh.faces[fi];
        for (int k = 0; k < 3; ++k) {
            const int a = f[k];
            const int b = f[(k + 1) % 3];
            EdgeInfo& info = edge_map[{std::min(a, b), std::max(a, b)}];
            info.faces.push_back(static_cast<int>(fi));
            if (a < b)
                ++info.forward;
            else
                ++info.backward;
        }
    }

    adj.edges.reserve(edge_map.size());
    for (const auto& [key, info] : edge_map) {
        EdgeRecord rec;
        rec.v0 = key.first;
        rec.v1 = key.second;
        rec.face0 = info.faces[0];
        rec.face1 = info.faces.size() > 1 ? info.faces[1] : -1;
        const int idx = static_cast<int>(adj.edges.size());
        if (info.faces.size() == 1) {
            adj.boundary_edges.push_back(idx);
        } else if (info.faces.size() > 2) {
            adj.nonmanifold_edges.push_back(idx);
            adj.consistently_oriented = false;
        } else if (info.forward != 1 || info.backward != 1) {
            adj.consistently_oriented = false;
        }
        adj.edges.push_back(rec);
        adj.vertex_neighbors[static_cast<std::size_t>(key.first)].push_back(key.second);
        adj.vertex_neighbors[static_cast<std::size_t>(key.second)].push_back(key.first);
    }
    for (auto& nbrs : adj.vertex_neighbors) std::sort(nbrs.begin(), nbrs.end());
    return adj;
}

FaceGeometry face_areas_normals(const Mesh& mesh) {
    FaceGeometry geom;
    geom.areas.resize(mesh.faces.size());
    geom.normals.resize(mesh.faces.size());
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        const Vec3& v1 = mesh.vertices[static_cast<std::size_t>(f[0])];
        const Vec3& v2 = mesh.vertices[static_cast<std::size_t>(f[1])];
        const Vec3& v3 = mesh.vertices[static_cast<std::size_t>(f[2])];
        const Vec3 c = cross(v2 - v1, v3 - v1);
        const double len = norm(c);
        geom.areas[i] = 0.5 * len;
        if (len > 0.0) {
            geom.normals[i] = c / len;
        } else {
            geom.normals[i] = Vec3{0.0, 0.0, 0.0};
            geom.degenerate_faces.push_back(static_cast<int>(i));
        }
        geom.total_area += geom.areas[i];
    }
    return geom;
}

int euler_characteristic(const Mesh& mesh, const Adjacency& adjacency) {
    return mesh.vertex_count() - adjacency.edge_count() + mesh.face_count();
}

std::pair<Mesh, NormalizeTransform> normalize_mesh(const Mesh& mesh) {
    if (mesh.vertices.empty()) throw MeshError("cannot normalize an empty mesh");
    Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
    for (const Vec3& v : mesh.vertices) {
        for (int k = 0; k < 3; ++k) {
            lo[static_cast<std::size_t>(k)] = std::min(lo[static_cast<std::size_t>(k)], v[static_cast<std::size_t>(k)]);
            hi[static_cast<std::size_t>(k)] = std::max(hi[static_cast<std::size_t>(k)], v[static_cast<std::size_t>(k)]);
        }
    }
    NormalizeTransform t;
    t.center = (lo + hi) * 0.5;
    double max_r = 0.0;
    for (const Vec3& v : mesh.vertices) max_r = std::max(max_r, norm(v - t.center));
    if (max_r <= 0.0) throw MeshError("cannot normalize: all vertices coincide");
    t.scale = max_r;

    Mesh out;
    out.faces = mesh.faces;
    out.vertices.reserve(mesh.vertices.size());
    for (const Vec3& v : mesh.vertices) out.vertices.push_back((v - t.center) / t.scale);
    return {std::move(out), t};
}

std::uint64_t face_topology_hash(const Mesh& mesh) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    mix(static_cast<std::uint64_t>(mesh.face_count()));
    for (const auto& f : mesh.faces) {
        mix(static_cast<std::uint64_t>(f[0]));
        mix(static_cast<std::uint64_t>(f[1]));
        mix(static_cast<std::uint64_t>(f[2]));
    }
    return h;
}

}  // namespace meshadv
