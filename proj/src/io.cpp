#include "svfbp/io.hpp"

#include <fstream>

namespace svfbp::io {

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t seed) {
    const unsigned char* b = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_io("cannot open file for hashing: " + path.string());
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (f) {
        f.read(buf, sizeof(buf));
        std::streamsize got = f.gcount();
        if (got > 0) h = fnv1a_bytes(buf, static_cast<std::size_t>(got), h);
    }
    return h;
}

fs::path sidecar_path(const fs::path& f32_path) {
    fs::path p = f32_path;
    p.replace_extension(".json");
    return p;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_io("cannot write " + path.string());
    f << j.dump(2) << "\n";
    if (!f) fail_io("short write to " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_io("cannot open " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        fail_io("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

const json& sidecar_field(const json& sidecar, const std::string& field, const fs::path& origin) {
    auto it = sidecar.find(field);
    if (it == sidecar.end())
        fail_io("sidecar " + origin.string() + " is missing the field '" + field + "'");
    return *it;
}

namespace {

void write_f32_payload(const fs::path& path, const float* data, std::size_t n) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_io("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
    if (!f) fail_io("short write to " + path.string());
}

std::vector<float> read_f32_payload(const fs::path& path, std::size_t expected) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) fail_io("cannot open " + path.string());
    auto bytes = static_cast<std::size_t>(f.tellg());
    if (bytes != expected * sizeof(float))
        fail_consistency(path.string() + ": payload size " + std::to_string(bytes) +
                         " does not match the sidecar shape (" + std::to_string(expected * sizeof(float)) +
                         " bytes expected)");
    f.seekg(0);
    std::vector<float> out(expected);
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (!f) fail_io("short read from " + path.string());
    return out;
}

}  // namespace

template <typename T>
void write_array3(const fs::path& f32_path, const Array3D<T>& a, json sidecar_extra) {
    std::vector<float> buf(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) buf[i] = static_cast<float>(a[i]);
    write_f32_payload(f32_path, buf.data(), buf.size());
    json side = std::move(sidecar_extra);
    side["shape"] = {a.n0(), a.n1(), a.n2()};
    side["dtype"] = "f32le";
    side["order"] = "C";
    write_json_file(sidecar_path(f32_path), side);
}

template <typename T>
Array3D<T> read_array3(const fs::path& f32_path, json* sidecar_out) {
    fs::path sp = sidecar_path(f32_path);
    if (!fs::exists(sp)) fail_io("missing sidecar " + sp.string());
    json side = read_json_file(sp);
    const json& shape = sidecar_field(side, "shape", sp);
    if (!shape.is_array() || shape.size() != 3)
        fail_io("sidecar " + sp.string() + " field 'shape' must be a 3-element array");
    if (sidecar_field(side, "dtype", sp) != "f32le")
        fail_io("sidecar " + sp.string() + " field 'dtype' must be \"f32le\"");
    if (sidecar_field(side, "order", sp) != "C")
        fail_io("sidecar " + sp.string() + " field 'order' must be \"C\"");
    std::size_t n0 = shape[0].get<std::size_t>(), n1 = shape[1].get<std::size_t>(),
                n2 = shape[2].get<std::size_t>();
    std::vector<float> buf = read_f32_payload(f32_path, n0 * n1 * n2);
    Array3D<T> a(n0, n1, n2);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<T>(buf[i]);
    if (sidecar_out) *sidecar_out = std::move(side);
    return a;
}

template <typename T>
void write_volume(const fs::path& f32_path, const Volume<T>& v) {
    json extra;
    extra["kind"] = "volume";
    extra["spacing"] = {v.spacing[0], v.spacing[1], v.spacing[2]};
    extra["fov_radius"] = v.fov_radius;
    write_array3(f32_path, v.data, extra);
}

template <typename T>
Volume<T> read_volume(const fs::path& f32_path) {
    json side;
    Array3D<T> a = read_array3<T>(f32_path, &side);
    fs::path sp = sidecar_path(f32_path);
    const json& spacing = sidecar_field(side, "spacing", sp);
    if (!spacing.is_array() || spacing.size() != 3)
        fail_io("sidecar " + sp.string() + " field 'spacing' must be a 3-element array");
    Volume<T> v;
    v.data = std::move(a);
    v.spacing = {spacing[0].get<double>(), spacing[1].get<double>(), spacing[2].get<double>()};
    v.fov_radius = side.contains("fov_radius") ? side["fov_radius"].get<double>() : 0.0;
    return v;
}

template <typename T>
std::pair<Volume<T>, AffineMap> load_volume(const fs::path& f32_path) {
    Volume<T> v = read_volume<T>(f32_path);
    if (!all_finite(v.data.data(), v.data.size()))
        fail_consistency(f32_path.string() + ": volume contains non-finite values");
    AffineMap map;
    auto [lo, hi] = min_max(v.data);
    (void)hi;
    if (lo < 0.0) {
        map.offset = -lo;
        for (std::size_t i = 0; i < v.data.size(); ++i)
            v.data[i] = static_cast<T>(static_cast<double>(v.data[i]) + map.offset);
    }
    if (v.fov_radius <= 0.0) {
        v.fov_radius = 0.5 * std::min({v.data.n0() * v.spacing[0], v.data.n1() * v.spacing[1],
                                       v.data.n2() * v.spacing[2]});
    }
    return {std::move(v), map};
}

template <typename T>
void write_projections(const fs::path& f32_path, const Array3D<T>& stack, double spacing_y,
                       double spacing_x) {
    json extra;
    extra["kind"] = "projection_stack";
    extra["detector_spacing"] = {spacing_y, spacing_x};
    write_array3(f32_path, stack, extra);
}

template <typename T>
Array3D<T> read_projections(const fs::path& f32_path) {
    return read_array3<T>(f32_path);
}

json grid_to_json(const SinogramGrid& grid) {
    json j;
    j["num_angles"] = grid.num_angles;
    j["angular_range"] = grid.angular_range;
    j["num_s"] = grid.num_s;
    j["s_spacing"] = grid.s_spacing;
    j["clip_radius"] = grid.clip_radius;
    return j;
}

SinogramGrid grid_from_json(const json& j, const fs::path& origin) {
    SinogramGrid g;
    g.num_angles = sidecar_field(j, "num_angles", origin).get<int>();
    g.angular_range = sidecar_field(j, "angular_range", origin).get<double>();
    g.num_s = sidecar_field(j, "num_s", origin).get<int>();
    g.s_spacing = sidecar_field(j, "s_spacing", origin).get<double>();
    g.clip_radius = sidecar_field(j, "clip_radius", origin).get<double>();
    return g;
}

template <typename T>
void write_weights(const fs::path& f32_path, const Array3D<T>& w, const SinogramGrid& grid,
                   std::uint64_t trajectory_hash) {
    json extra;
    extra["kind"] = "redundancy_weights";
    extra["num_projections"] = w.n0();
    extra["grid"] = grid_to_json(grid);
    extra["trajectory_hash"] = hex64(trajectory_hash);
    write_array3(f32_path, w, extra);
}

template <typename T>
Array3D<T> read_weights(const fs::path& f32_path, SinogramGrid* grid_out,
                        std::uint64_t* trajectory_hash_out) {
    json side;
    Array3D<T> w = read_array3<T>(f32_path, &side);
    fs::path sp = sidecar_path(f32_path);
    if (grid_out) *grid_out = grid_from_json(sidecar_field(side, "grid", sp), sp);
    if (trajectory_hash_out) {
        std::string hex = sidecar_field(side, "trajectory_hash", sp).get<std::string>();
        *trajectory_hash_out = std::stoull(hex, nullptr, 16);
    }
    return w;
}

template <typename T>
void write_moment(const fs::path& f32_path, const Array3D<T>& m, long step) {
    json extra;
    extra["kind"] = "adamw_state";
    extra["step"] = step;
    write_array3(f32_path, m, extra);
}

template <typename T>
Array3D<T> read_moment(const fs::path& f32_path, long* step_out) {
    json side;
    Array3D<T> m = read_array3<T>(f32_path, &side);
    if (step_out) *step_out = sidecar_field(side, "step", sidecar_path(f32_path)).get<long>();
    return m;
}

json geometry_to_json(const ConeBeamGeometry& geom) {
    json j;
    j["source_isocenter_distance"] = geom.source_isocenter_distance;
    j["source_detector_distance"] = geom.source_detector_distance;
    j["detector_shape"] = {geom.detector_rows, geom.detector_cols};
    j["detector_spacing"] = {geom.detector_spacing_y, geom.detector_spacing_x};
    j["volume_shape"] = {geom.vol_nz, geom.vol_ny, geom.vol_nx};
    j["volume_spacing"] = {geom.vol_sz, geom.vol_sy, geom.vol_sx};
    j["num_projections"] = geom.num_projections;
    j["fov_radius"] = geom.fov_radius;
    return j;
}

ConeBeamGeometry geometry_from_json(const json& j, const fs::path& origin) {
    ConeBeamGeometry g;
    g.source_isocenter_distance = sidecar_field(j, "source_isocenter_distance", origin).get<double>();
    g.source_detector_distance = sidecar_field(j, "source_detector_distance", origin).get<double>();
    const json& ds = sidecar_field(j, "detector_shape", origin);
    g.detector_rows = ds[0].get<int>();
    g.detector_cols = ds[1].get<int>();
    const json& dsp = sidecar_field(j, "detector_spacing", origin);
    g.detector_spacing_y = dsp[0].get<double>();
    g.detector_spacing_x = dsp[1].get<double>();
    const json& vs = sidecar_field(j, "volume_shape", origin);
    g.vol_nz = vs[0].get<int>();
    g.vol_ny = vs[1].get<int>();
    g.vol_nx = vs[2].get<int>();
    const json& vsp = sidecar_field(j, "volume_spacing", origin);
    g.vol_sz = vsp[0].get<double>();
    g.vol_sy = vsp[1].get<double>();
    g.vol_sx = vsp[2].get<double>();
    g.num_projections = sidecar_field(j, "num_projections", origin).get<int>();
    g.fov_radius = sidecar_field(j, "fov_radius", origin).get<double>();
    return g;
}

namespace {

json vec_to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from_json(const json& j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }

}  // namespace

void write_trajectory(const fs::path& json_path, const Trajectory& traj,
                      const ConeBeamGeometry& geom) {
    json j;
    j["version"] = 1;
    j["geometry"] = geometry_to_json(geom);
    j["closed"] = traj.closed;
    json sources = json::array(), tangents = json::array(), frames = json::array();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        sources.push_back(vec_to_json(traj.sources[i]));
        tangents.push_back(vec_to_json(traj.tangents[i]));
        json f;
        f["origin"] = vec_to_json(traj.frames[i].origin);
        f["axis_x"] = vec_to_json(traj.frames[i].axis_x);
        f["axis_y"] = vec_to_json(traj.frames[i].axis_y);
        f["axis_z"] = vec_to_json(traj.frames[i].axis_z);
        frames.push_back(std::move(f));
    }
    j["sources"] = std::move(sources);
    j["tangents"] = std::move(tangents);
    j["frames"] = std::move(frames);
    write_json_file(json_path, j);
}

std::pair<Trajectory, ConeBeamGeometry> read_trajectory(const fs::path& json_path) {
    json j = read_json_file(json_path);
    ConeBeamGeometry geom = geometry_from_json(sidecar_field(j, "geometry", json_path), json_path);
    Trajectory t;
    t.closed = sidecar_field(j, "closed", json_path).get<bool>();
    const json& sources = sidecar_field(j, "sources", json_path);
    const json& tangents = sidecar_field(j, "tangents", json_path);
    const json& frames = sidecar_field(j, "frames", json_path);
    if (sources.size() != tangents.size() || sources.size() != frames.size())
        fail_consistency(json_path.string() + ": sources/tangents/frames lengths differ");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        t.sources.push_back(vec_from_json(sources[i]));
        t.tangents.push_back(vec_from_json(tangents[i]));
        DetectorFrame f;
        f.origin = vec_from_json(frames[i]["origin"]);
        f.axis_x = vec_from_json(frames[i]["axis_x"]);
        f.axis_y = vec_from_json(frames[i]["axis_y"]);
        f.axis_z = vec_from_json(frames[i]["axis_z"]);
        t.frames.push_back(f);
    }
    t.validate(geom);
    return {std::move(t), geom};
}

#define SVFBP_INSTANTIATE_IO(T)                                                                    \
    template void write_array3<T>(const fs::path&, const Array3D<T>&, json);                       \
    template Array3D<T> read_array3<T>(const fs::path&, json*);                                    \
    template void write_volume<T>(const fs::path&, const Volume<T>&);                              \
    template Volume<T> read_volume<T>(const fs::path&);                                            \
    template std::pair<Volume<T>, AffineMap> load_volume<T>(const fs::path&);                      \
    template void write_projections<T>(const fs::path&, const Array3D<T>&, double, double);        \
    template Array3D<T> read_projections<T>(const fs::path&);                                      \
    template void write_weights<T>(const fs::path&, const Array3D<T>&, const SinogramGrid&,        \
                                   std::uint64_t);                                                 \
    template Array3D<T> read_weights<T>(const fs::path&, SinogramGrid*, std::uint64_t*);           \
    template void write_moment<T>(const fs::path&, const Array3D<T>&, long);                       \
    template Array3D<T> read_moment<T>(const fs::path&, long*);

SVFBP_INSTANTIATE_IO(float)
SVFBP_INSTANTIATE_IO(double)

}  // namespace svfbp::io
