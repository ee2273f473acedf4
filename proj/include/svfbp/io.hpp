#pragma once

// File formats: raw little-endian float32 arrays in C order with JSON
// sidecars, trajectory JSON documents, run manifests, and content hashes.
// The sidecar of <name>.f32 is <name>.json.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "svfbp/array.hpp"
#include "svfbp/geometry.hpp"
#include "svfbp/volume.hpp"

namespace svfbp::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string hex64(std::uint64_t v);
std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ull);
std::uint64_t fnv1a_file(const fs::path& path);

fs::path sidecar_path(const fs::path& f32_path);

void write_json_file(const fs::path& path, const json& j);
json read_json_file(const fs::path& path);

/// Fetch a required sidecar field, failing with the field name.
const json& sidecar_field(const json& sidecar, const std::string& field, const fs::path& origin);

// --- generic 3D array payloads ---

template <typename T>
void write_array3(const fs::path& f32_path, const Array3D<T>& a, json sidecar_extra = json::object());

template <typename T>
Array3D<T> read_array3(const fs::path& f32_path, json* sidecar_out = nullptr);

// --- typed wrappers ---

template <typename T>
void write_volume(const fs::path& f32_path, const Volume<T>& v);

template <typename T>
Volume<T> read_volume(const fs::path& f32_path);

struct AffineMap {
    double scale = 1.0;
    double offset = 0.0;
};

/// Externally supplied volume: validates the sidecar, rejects non-finite
/// values, and shifts negative values up to zero. The applied affine map
/// is returned for the caller's manifest.
template <typename T>
std::pair<Volume<T>, AffineMap> load_volume(const fs::path& f32_path);

template <typename T>
void write_projections(const fs::path& f32_path, const Array3D<T>& stack, double spacing_y,
                       double spacing_x);

template <typename T>
Array3D<T> read_projections(const fs::path& f32_path);

json grid_to_json(const SinogramGrid& grid);
SinogramGrid grid_from_json(const json& j, const fs::path& origin);

template <typename T>
void write_weights(const fs::path& f32_path, const Array3D<T>& w, const SinogramGrid& grid,
                   std::uint64_t trajectory_hash);

template <typename T>
Array3D<T> read_weights(const fs::path& f32_path, SinogramGrid* grid_out = nullptr,
                        std::uint64_t* trajectory_hash_out = nullptr);

/// Optimizer-state payload (same layout as a weight file plus the step).
template <typename T>
void write_moment(const fs::path& f32_path, const Array3D<T>& m, long step);

template <typename T>
Array3D<T> read_moment(const fs::path& f32_path, long* step_out = nullptr);

// --- trajectory documents ---

json geometry_to_json(const ConeBeamGeometry& geom);
ConeBeamGeometry geometry_from_json(const json& j, const fs::path& origin);

void write_trajectory(const fs::path& json_path, const Trajectory& traj,
                      const ConeBeamGeometry& geom);
std::pair<Trajectory, ConeBeamGeometry> read_trajectory(const fs::path& json_path);

}  // namespace svfbp::io
