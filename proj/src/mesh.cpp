#include "sssn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace sssn {

namespace {

using FaceKey = std::array<int, 3>;

FaceKey sorted_key(int a, int b, int c) {
  FaceKey k{a, b, c};
  std::sort(k.begin(), k.end());
  return k;
}

struct TetFace {
  FaceKey key;
  int tet;
  int opposite;
};

// All tet faces sorted by key; shared faces end up adjacent.
std::vector<TetFace> collect_tet_faces(const TetMesh& mesh) {
  std::vector<TetFace> faces;
  faces.reserve(4 * mesh.tets.size());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& v = mesh.tets[t];
    for (int l = 0; l < 4; ++l) {
      faces.push_back({sorted_key(v[(l + 1) % 4], v[(l + 2) % 4], v[(l + 3) % 4]), t, v[l]});
    }
  }
  std::sort(faces.begin(), faces.end(), [](const TetFace& a, const TetFace& b) {
    return a.key != b.key ? a.key < b.key : a.tet < b.tet;
  });
  return faces;
}

// Unique exterior faces (owned by exactly one tet), sorted by key.
std::vector<TetFace> exterior_faces(const TetMesh& mesh) {
  const auto faces = collect_tet_faces(mesh);
  std::vector<TetFace> out;
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    if (j - i == 1) {
      out.push_back(faces[i]);
    } else if (j - i > 2) {
      throw MeshError("face shared by more than two tets (first tet " +
                      std::to_string(faces[i].tet) + ")");
    }
    i = j;
  }
  return out;
}

const TetFace* find_face(const std::vector<TetFace>& faces, const FaceKey& key) {
  auto it = std::lower_bound(faces.begin(), faces.end(), key,
                             [](const TetFace& f, const FaceKey& k) { return f.key < k; });
  if (it == faces.end() || it->key != key) return nullptr;
  return &*it;
}

char tag_letter(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Dirichlet: return 'D';
    case BoundaryTag::Neumann: return 'N';
    case BoundaryTag::Slip: return 'S';
  }
  return '?';
}

}  // namespace

double signed_volume(const Point& a, const Point& b, const Point& c, const Point& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double tet_volume(const TetMesh& mesh, int tet) {
  const auto& v = mesh.tets[tet];
  return signed_volume(mesh.nodes[v[0]], mesh.nodes[v[1]], mesh.nodes[v[2]], mesh.nodes[v[3]]);
}

TetMesh generate_unit_cube_mesh(int n) {
  if (n < 1) throw MeshError("cube mesh needs at least one subdivision, got " + std::to_string(n));
  // 3 velocity components per node must still fit the index type.
  const long long np = static_cast<long long>(n + 1) * (n + 1) * (n + 1);
  if (n > 1000 || 3 * np > std::numeric_limits<int>::max() ||
      5LL * n * n * n > std::numeric_limits<int>::max()) {
    throw MeshError("cube mesh with n = " + std::to_string(n) + " overflows the index type");
  }

  TetMesh mesh;
  const int m = n + 1;
  auto id = [m](int i, int j, int k) { return i + m * (j + m * k); };
  mesh.nodes.reserve(static_cast<std::size_t>(np));
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        mesh.nodes.emplace_back(double(i) / n, double(j) / n, double(k) / n);

  mesh.tets.reserve(5 * static_cast<std::size_t>(n) * n * n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int parity = (i + j + k) % 2;
        std::array<int, 4> central{};
        int nc = 0;
        for (int c = 0; c < 2; ++c)
          for (int b = 0; b < 2; ++b)
            for (int a = 0; a < 2; ++a) {
              if ((a + b + c + parity) % 2 == 0) {
                central[nc++] = id(i + a, j + b, k + c);
              } else {
                // corner tet: the odd vertex and its three edge neighbours
                mesh.tets.push_back({id(i + a, j + b, k + c), id(i + 1 - a, j + b, k + c),
                                     id(i + a, j + 1 - b, k + c), id(i + a, j + b, k + 1 - c)});
              }
            }
        mesh.tets.push_back(central);
      }
    }
  }
  for (auto& t : mesh.tets) {
    if (signed_volume(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]], mesh.nodes[t[3]]) < 0)
      std::swap(t[2], t[3]);
  }

  // Boundary quads split along the diagonal joining the even grid points.
  // axis: fixed coordinate, side: 0 or n.
  auto emit_face = [&](int axis, int side) {
    Eigen::Vector3d outward = Eigen::Vector3d::Zero();
    outward[axis] = side == 0 ? -1.0 : 1.0;
    const int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
    for (int q = 0; q < n; ++q) {
      for (int p = 0; p < n; ++p) {
        auto node = [&](int dp, int dq) {
          std::array<int, 3> ijk{};
          ijk[axis] = side;
          ijk[u_axis] = p + dp;
          ijk[v_axis] = q + dq;
          return id(ijk[0], ijk[1], ijk[2]);
        };
        const int n00 = node(0, 0), n10 = node(1, 0), n01 = node(0, 1), n11 = node(1, 1);
        const bool even00 = (side + p + q) % 2 == 0;
        std::array<std::array<int, 3>, 2> tris =
            even00 ? std::array<std::array<int, 3>, 2>{{{n00, n10, n11}, {n00, n11, n01}}}
                   : std::array<std::array<int, 3>, 2>{{{n00, n10, n01}, {n10, n11, n01}}};
        for (auto& tri : tris) {
          const Point& a = mesh.nodes[tri[0]];
          const Eigen::Vector3d nrm = (mesh.nodes[tri[1]] - a).cross(mesh.nodes[tri[2]] - a);
          if (nrm.dot(outward) < 0) std::swap(tri[1], tri[2]);
          mesh.boundary_faces.push_back({tri, BoundaryTag::Dirichlet, 0});
        }
      }
    }
  };
  for (int axis = 0; axis < 3; ++axis) {
    emit_face(axis, 0);
    emit_face(axis, n);
  }
  return mesh;
}

TetMesh tag_cube_boundary(TetMesh mesh) {
  constexpr double tol = 1e-12;
  for (std::size_t f = 0; f < mesh.boundary_faces.size(); ++f) {
    auto& face = mesh.boundary_faces[f];
    auto on_plane = [&](int axis, double value) {
      return std::all_of(face.nodes.begin(), face.nodes.end(), [&](int v) {
        return std::abs(mesh.nodes[v][axis] - value) <= tol;
      });
    };
    if (on_plane(1, 1.0)) {
      face.tag = BoundaryTag::Slip;
      face.label = 0;
    } else if (on_plane(0, 0.0)) {
      face.tag = BoundaryTag::Neumann;
      face.label = 1;
    } else if (on_plane(0, 1.0)) {
      face.tag = BoundaryTag::Neumann;
      face.label = 2;
    } else if (on_plane(1, 0.0) || on_plane(2, 0.0) || on_plane(2, 1.0)) {
      face.tag = BoundaryTag::Dirichlet;
      face.label = 0;
    } else {
      throw MeshError("boundary face " + std::to_string(f) + " does not lie on a cube face");
    }
  }
  return mesh;
}

void validate_mesh(const TetMesh& mesh) {
  const int np = mesh.num_nodes();
  for (int t = 0; t < mesh.num_tets(); ++t) {
    for (int v : mesh.tets[t]) {
      if (v < 0 || v >= np)
        throw MeshError("tet " + std::to_string(t) + " references node " + std::to_string(v) +
                        " outside [0, " + std::to_string(np) + ")");
    }
    const auto& v = mesh.tets[t];
    if (std::set<int>{v[0], v[1], v[2], v[3]}.size() != 4)
      throw MeshError("tet " + std::to_string(t) + " repeats a node");
    if (!(tet_volume(mesh, t) > 0.0))
      throw MeshError("tet " + std::to_string(t) + " is inverted or degenerate");
  }
  for (std::size_t f = 0; f < mesh.boundary_faces.size(); ++f) {
    for (int v : mesh.boundary_faces[f].nodes) {
      if (v < 0 || v >= np)
        throw MeshError("boundary face " + std::to_string(f) + " references node " +
                        std::to_string(v) + " outside [0, " + std::to_string(np) + ")");
    }
  }

  const auto exterior = exterior_faces(mesh);
  std::vector<char> seen(exterior.size(), 0);
  for (std::size_t f = 0; f < mesh.boundary_faces.size(); ++f) {
    const auto& n = mesh.boundary_faces[f].nodes;
    const TetFace* hit = find_face(exterior, sorted_key(n[0], n[1], n[2]));
    if (hit == nullptr)
      throw MeshError("boundary face " + std::to_string(f) + " is not an exterior face of any tet");
    char& s = seen[hit - exterior.data()];
    if (s) throw MeshError("boundary face " + std::to_string(f) + " is listed twice");
    s = 1;
  }
  for (std::size_t i = 0; i < exterior.size(); ++i) {
    if (!seen[i])
      throw MeshError("exterior face of tet " + std::to_string(exterior[i].tet) +
                      " carries no boundary tag");
  }

  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& face : mesh.boundary_faces) {
    for (int e = 0; e < 3; ++e) {
      int a = face.nodes[e], b = face.nodes[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  }
  for (const auto& [edge, count] : edge_count) {
    if (count != 2)
      throw MeshError("boundary surface not closed at edge (" + std::to_string(edge.first) + ", " +
                      std::to_string(edge.second) + ")");
  }
}

std::vector<int> opposite_vertices(const TetMesh& mesh) {
  const auto faces = collect_tet_faces(mesh);
  std::vector<int> out(mesh.boundary_faces.size(), -1);
  for (std::size_t f = 0; f < mesh.boundary_faces.size(); ++f) {
    const auto& n = mesh.boundary_faces[f].nodes;
    const TetFace* hit = find_face(faces, sorted_key(n[0], n[1], n[2]));
    if (hit == nullptr)
      throw MeshError("boundary face " + std::to_string(f) + " is not a tet face");
    out[f] = hit->opposite;
  }
  return out;
}

Eigen::Vector3d outward_area_vector(const TetMesh& mesh, int face, int opposite) {
  const auto& n = mesh.boundary_faces[face].nodes;
  const Point& a = mesh.nodes[n[0]];
  Eigen::Vector3d v = 0.5 * (mesh.nodes[n[1]] - a).cross(mesh.nodes[n[2]] - a);
  if (v.dot(mesh.nodes[opposite] - a) > 0) v = -v;
  return v;
}

TetMesh read_mesh(std::istream& in) {
  int line_no = 0;
  std::string raw;
  // Next non-empty line with comments stripped.
  auto next_line = [&](std::istringstream& ls) {
    while (std::getline(in, raw)) {
      ++line_no;
      if (auto pos = raw.find('#'); pos != std::string::npos) raw.erase(pos);
      if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
      ls.clear();
      ls.str(raw);
      return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) -> MeshError {
    return MeshError("line " + std::to_string(line_no) + ": " + what);
  };
  auto expect_trailing_empty = [&](std::istringstream& ls) {
    std::string extra;
    if (ls >> extra) throw fail("unexpected token '" + extra + "'");
  };
  auto read_count = [&](const std::string& keyword) {
    std::istringstream ls;
    if (!next_line(ls)) throw fail("missing '" + keyword + "' section");
    std::string word;
    long long count = -1;
    if (!(ls >> word) || word != keyword) throw fail("expected '" + keyword + "'");
    if (!(ls >> count) || count < 0 || count > std::numeric_limits<int>::max())
      throw fail("bad " + keyword + " count");
    expect_trailing_empty(ls);
    return static_cast<int>(count);
  };

  std::istringstream ls;
  if (!next_line(ls)) throw fail("empty mesh file");
  std::string magic;
  int version = 0;
  if (!(ls >> magic >> version) || magic != "tetmesh" || version != 1)
    throw fail("expected header 'tetmesh 1'");
  expect_trailing_empty(ls);

  TetMesh mesh;
  const int np = read_count("nodes");
  mesh.nodes.resize(np);
  for (int i = 0; i < np; ++i) {
    if (!next_line(ls)) throw fail("unexpected end of file in nodes");
    Point& p = mesh.nodes[i];
    if (!(ls >> p[0] >> p[1] >> p[2])) throw fail("expected three coordinates");
    if (!p.allFinite()) throw fail("non-finite coordinate");
    expect_trailing_empty(ls);
  }
  const int nt = read_count("tets");
  mesh.tets.resize(nt);
  for (int t = 0; t < nt; ++t) {
    if (!next_line(ls)) throw fail("unexpected end of file in tets");
    auto& v = mesh.tets[t];
    if (!(ls >> v[0] >> v[1] >> v[2] >> v[3])) throw fail("expected four node indices");
    expect_trailing_empty(ls);
  }
  const int nf = read_count("bfaces");
  mesh.boundary_faces.resize(nf);
  for (int f = 0; f < nf; ++f) {
    if (!next_line(ls)) throw fail("unexpected end of file in bfaces");
    auto& face = mesh.boundary_faces[f];
    std::string tag;
    if (!(ls >> face.nodes[0] >> face.nodes[1] >> face.nodes[2] >> tag))
      throw fail("expected 'i j k TAG'");
    expect_trailing_empty(ls);
    if (tag == "D") {
      face.tag = BoundaryTag::Dirichlet;
    } else if (tag == "S") {
      face.tag = BoundaryTag::Slip;
    } else if (tag[0] == 'N') {
      face.tag = BoundaryTag::Neumann;
      if (tag.size() > 1) {
        if (!std::all_of(tag.begin() + 1, tag.end(), ::isdigit) || tag.size() > 8)
          throw fail("bad boundary tag '" + tag + "'");
        face.label = std::stoi(tag.substr(1));
      }
    } else {
      throw fail("bad boundary tag '" + tag + "'");
    }
  }
  std::istringstream rest;
  if (next_line(rest)) throw fail("trailing content after bfaces");
  return mesh;
}

void write_mesh(std::ostream& out, const TetMesh& mesh) {
  out << "tetmesh 1\n";
  out << "nodes " << mesh.nodes.size() << '\n';
  out << std::setprecision(17);
  for (const auto& p : mesh.nodes) out << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  out << "tets " << mesh.tets.size() << '\n';
  for (const auto& t : mesh.tets) out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "bfaces " << mesh.boundary_faces.size() << '\n';
  for (const auto& f : mesh.boundary_faces) {
    out << f.nodes[0] << ' ' << f.nodes[1] << ' ' << f.nodes[2] << ' ' << tag_letter(f.tag);
    if (f.tag == BoundaryTag::Neumann && f.label != 0) out << f.label;
    out << '\n';
  }
}

TetMesh import_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file '" + path + "'");
  TetMesh mesh;
  try {
    mesh = read_mesh(in);
  } catch (const MeshError& e) {
    throw MeshError(path + ": " + e.what());
  }
  validate_mesh(mesh);
  return mesh;
}

void export_mesh(const std::string& path, const TetMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file '" + path + "'");
  write_mesh(out, mesh);
  if (!out) throw MeshError("error while writing '" + path + "'");
}

NodeSets classify_nodes(const TetMesh& mesh) {
  const int np = mesh.num_nodes();
  std::vector<char> on_dirichlet(np, 0), on_slip(np, 0);
  for (const auto& face : mesh.boundary_faces) {
    for (int v : face.nodes) {
      if (face.tag == BoundaryTag::Dirichlet) on_dirichlet[v] = 1;
      if (face.tag == BoundaryTag::Slip) on_slip[v] = 1;
    }
  }
  NodeSets sets;
  sets.unknown_index.assign(np, -1);
  for (int v = 0; v < np; ++v) {
    if (on_dirichlet[v]) sets.dirichlet.push_back(v);
    else if (on_slip[v]) sets.slip.push_back(v);
    else sets.remaining.push_back(v);
  }
  int k = 0;
  for (int v : sets.slip) sets.unknown_index[v] = k++;
  for (int v : sets.remaining) sets.unknown_index[v] = k++;
  return sets;
}

SlipFrame frame_from_normal(const Eigen::Vector3d& normal) {
  int axis = 0;
  for (int d = 1; d < 3; ++d)
    if (std::abs(normal[d]) < std::abs(normal[axis])) axis = d;
  Eigen::Vector3d t1 = Eigen::Vector3d::Unit(axis);
  t1 -= t1.dot(normal) * normal;
  t1.normalize();
  const Eigen::Vector3d t2 = normal.cross(t1);
  SlipFrame frame;
  frame.tangent.row(0) = t1.transpose();
  frame.tangent.row(1) = t2.transpose();
  frame.normal = normal.transpose();
  return frame;
}

std::vector<SlipFrame> compute_slip_frames(const TetMesh& mesh, const NodeSets& sets,
                                           const ScalarField& g, const ScalarField& kappa) {
  const int ns = sets.n_s();
  std::vector<Eigen::Vector3d> area_normal(ns, Eigen::Vector3d::Zero());
  std::vector<double> measure(ns, 0.0);
  const auto opposite = opposite_vertices(mesh);
  for (std::size_t f = 0; f < mesh.boundary_faces.size(); ++f) {
    const auto& face = mesh.boundary_faces[f];
    if (face.tag != BoundaryTag::Slip) continue;
    const Eigen::Vector3d av = outward_area_vector(mesh, static_cast<int>(f), opposite[f]);
    const double area = av.norm();
    for (int v : face.nodes) {
      const int k = sets.unknown_index[v];
      if (k < 0 || k >= ns) continue;  // Dirichlet node on the slip boundary
      area_normal[k] += av;
      measure[k] += area / 3.0;
    }
  }
  std::vector<SlipFrame> frames(ns);
  for (int k = 0; k < ns; ++k) {
    const double len = area_normal[k].norm();
    if (!(len > 1e-14 * std::max(measure[k], 1e-300)) || !(measure[k] > 0.0))
      throw MeshError("degenerate slip patch at node " + std::to_string(sets.slip[k]));
    frames[k] = frame_from_normal(area_normal[k] / len);
    const Point& x = mesh.nodes[sets.slip[k]];
    const double gv = g(x), kv = kappa(x);
    if (!std::isfinite(gv) || gv < 0.0 || !std::isfinite(kv) || kv < 0.0)
      throw MeshError("slip bound or adhesion negative or non-finite at node " +
                      std::to_string(sets.slip[k]));
    frames[k].measure = measure[k];
    frames[k].slip_weight = measure[k] * gv;
    frames[k].adhesion_weight = measure[k] * kv;
  }
  return frames;
}

}  // namespace sssn
