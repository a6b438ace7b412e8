#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "panostage/math.hpp"

namespace panostage {

// Minimal Wavefront OBJ geometry: v and f records, faces fan-triangulated.
// Convention for furniture: +y is the object's front, footprint around origin.
struct TriangleMesh {
    std::vector<vec3> positions;
    std::vector<std::array<int, 3>> faces;
};

inline TriangleMesh read_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_obj: cannot open " + path);
    TriangleMesh mesh;
    std::string line;
    while (std::getline(is, line)) {
        if (line.size() < 2) continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            vec3 p;
            ss >> p.x >> p.y >> p.z;
            mesh.positions.push_back(p);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // "i", "i/t", "i//n", "i/t/n"; negative = relative to the end.
                const int raw = std::stoi(tok.substr(0, tok.find('/')));
                const int resolved = raw > 0 ? raw - 1 : int(mesh.positions.size()) + raw;
                if (resolved < 0 || resolved >= int(mesh.positions.size()))
                    throw std::runtime_error("read_obj: face index out of range in " + path);
                idx.push_back(resolved);
            }
            for (size_t i = 2; i < idx.size(); ++i)
                mesh.faces.push_back({idx[0], idx[int(i) - 1], idx[int(i)]});
        }
        // Normals, texcoords, materials and groups are not needed here.
    }
    if (mesh.faces.empty()) throw std::runtime_error("read_obj: no faces in " + path);
    return mesh;
}

inline void write_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_obj: cannot open " + path);
    os << "# panostage mesh\n";
    for (const vec3& p : mesh.positions) os << "v " << p.x << " " << p.y << " " << p.z << "\n";
    for (const auto& f : mesh.faces)
        os << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
}

// Axis-aligned box mesh centered on the xy origin, resting on z = 0.
inline TriangleMesh make_box_mesh(double size_x, double size_y, double size_z) {
    TriangleMesh m;
    const double hx = size_x / 2, hy = size_y / 2;
    for (int zi = 0; zi < 2; ++zi)
        for (int yi = 0; yi < 2; ++yi)
            for (int xi = 0; xi < 2; ++xi)
                m.positions.push_back({xi ? hx : -hx, yi ? hy : -hy, zi ? size_z : 0.0});
    auto quad = [&m](int a, int b, int c, int d) {
        m.faces.push_back({a, b, c});
        m.faces.push_back({a, c, d});
    };
    quad(0, 2, 3, 1);  // bottom
    quad(4, 5, 7, 6);  // top
    quad(0, 1, 5, 4);  // -y
    quad(2, 6, 7, 3);  // +y
    quad(0, 4, 6, 2);  // -x
    quad(1, 3, 7, 5);  // +x
    return m;
}

}  // namespace panostage
