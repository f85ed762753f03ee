#pragma once

#include <filesystem>
#include <string>

#include "hoc/types.hpp"

namespace hoc::io {

// Wavefront OBJ subset: v and f lines, polygons fan-triangulated.
// Face tokens of the form i/j/k keep only the vertex index.
TriangleMesh load_obj(const std::filesystem::path& path);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

// Whitespace-separated "x y z" text, one point per line.
// Values are written with enough digits to round-trip exactly.
PointCloud load_xyz(const std::filesystem::path& path);
void save_xyz(const Eigen::Ref<const PointCloud>& cloud,
              const std::filesystem::path& path);

}  // namespace hoc::io
