// Command-line front end: dataset generation, training, reconstruction,
// evaluation, and figure export. Every command resolves its parameters,
// runs, and writes a manifest.json capturing the resolved values, seeds
// and input hashes next to its outputs. Exit codes: 0 success, 2 usage or
// validation, 3 data consistency, 4 numerical failure.

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "svfbp/image_export.hpp"
#include "svfbp/io.hpp"
#include "svfbp/metrics.hpp"
#include "svfbp/phantom.hpp"
#include "svfbp/pipeline.hpp"
#include "svfbp/training.hpp"

namespace fs = std::filesystem;
using svfbp::io::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kDegree = M_PI / 180.0;

int exit_code_for(const svfbp::Error& e) {
    switch (e.kind()) {
        case svfbp::ErrorKind::validation:
        case svfbp::ErrorKind::io: return 2;
        case svfbp::ErrorKind::data_consistency: return 3;
        case svfbp::ErrorKind::numerical: return 4;
    }
    return 2;
}

struct GlobalOpts {
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
};

void apply_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

fs::path ensure_out_dir(const std::string& out) {
    svfbp::require(!out.empty(), "--out is required");
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

json base_manifest(const std::string& command, const GlobalOpts& g) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = g.seed;
    m["threads"] = g.threads;
    return m;
}

void write_manifest(const fs::path& dir, const json& m) {
    svfbp::io::write_json_file(dir / "manifest.json", m);
}

// geometry flags shared by gen-trajectory
struct GeometryOpts {
    svfbp::ConeBeamGeometry geom;
    bool fov_set = false;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--sid", geom.source_isocenter_distance, "source-isocenter distance (mm)")
            ->capture_default_str();
        cmd->add_option("--sdd", geom.source_detector_distance, "source-detector distance (mm)")
            ->capture_default_str();
        cmd->add_option("--detector-rows", geom.detector_rows, "detector rows")->capture_default_str();
        cmd->add_option("--detector-cols", geom.detector_cols, "detector columns")
            ->capture_default_str();
        cmd->add_option("--pixel-size-y", geom.detector_spacing_y, "detector row pitch (mm)")
            ->capture_default_str();
        cmd->add_option("--pixel-size-x", geom.detector_spacing_x, "detector column pitch (mm)")
            ->capture_default_str();
        cmd->add_option("--vol-nz", geom.vol_nz, "volume slices")->capture_default_str();
        cmd->add_option("--vol-ny", geom.vol_ny, "volume rows")->capture_default_str();
        cmd->add_option("--vol-nx", geom.vol_nx, "volume columns")->capture_default_str();
        cmd->add_option("--voxel-size-z", geom.vol_sz, "voxel z pitch (mm)")->capture_default_str();
        cmd->add_option("--voxel-size-y", geom.vol_sy, "voxel y pitch (mm)")->capture_default_str();
        cmd->add_option("--voxel-size-x", geom.vol_sx, "voxel x pitch (mm)")->capture_default_str();
        cmd->add_option("--num-projections", geom.num_projections, "source positions on the orbit")
            ->capture_default_str();
        cmd->add_option("--fov-radius", geom.fov_radius,
                        "support radius B (mm); default: half the smallest volume extent")
            ->each([this](const std::string&) { fov_set = true; });
    }

    svfbp::ConeBeamGeometry resolve() {
        if (!fov_set) geom.fov_radius = geom.default_fov_radius();
        geom.validate();
        return geom;
    }
};

// pipeline grid/smoothing overrides shared by train and reconstruct
struct PipelineOpts {
    int num_angles = 0;  // 0: derive from the detector
    int num_s = 0;
    double sigma = -1.0;  // < 0: derive from num_s
    int kernel_size = 0;
    bool no_nonneg = false;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--num-angles", num_angles, "sinogram angle count (default: from detector)");
        cmd->add_option("--num-s", num_s, "sinogram offset count (default: from detector)");
        cmd->add_option("--smooth-sigma-bins", sigma,
                        "Gaussian layer sigma in s bins (default: scaled preset)");
        cmd->add_option("--smooth-kernel", kernel_size, "Gaussian layer kernel size (odd)");
        cmd->add_flag("--no-nonneg", no_nonneg, "disable the final nonnegativity clamp");
    }

    svfbp::PipelineConfig resolve(const svfbp::ConeBeamGeometry& geom) const {
        auto cfg = svfbp::make_pipeline_config(geom, !no_nonneg);
        if (num_s > 0) {
            cfg.grid.num_s = num_s;
            cfg.smoothing = svfbp::SmoothingConfig::scaled_for(num_s);
        }
        if (num_angles > 0) cfg.grid.num_angles = num_angles;
        if (sigma >= 0.0) cfg.smoothing.sigma = sigma;
        if (kernel_size > 0) cfg.smoothing.kernel_size = kernel_size;
        cfg.validate();
        return cfg;
    }

    json to_json(const svfbp::PipelineConfig& cfg) const {
        json j;
        j["grid"] = svfbp::io::grid_to_json(cfg.grid);
        j["smoothing_sigma"] = cfg.smoothing.sigma;
        j["smoothing_kernel"] = cfg.smoothing.kernel_size;
        j["nonneg"] = cfg.nonneg;
        return j;
    }
};

svfbp::Trajectory make_trajectory(const std::string& kind, const svfbp::ConeBeamGeometry& geom,
                                  double phi_max_deg, int freq, double arc_fraction,
                                  double arc_span_deg, double tilt_range_deg, std::uint64_t seed) {
    if (kind == "circular") return svfbp::circular_trajectory(geom);
    if (kind == "sinusoidal") return svfbp::sinusoidal_trajectory(geom, phi_max_deg * kDegree, freq);
    if (kind == "circle-plus-arc")
        return svfbp::circle_plus_arc_trajectory(geom, arc_fraction, arc_span_deg * kDegree);
    if (kind == "random-nn") return svfbp::random_nn_trajectory(geom, tilt_range_deg * kDegree, seed);
    svfbp::fail_validation("unknown trajectory kind: " + kind);
}

// ---------------------------------------------------------------- commands

int cmd_gen_trajectory(const GlobalOpts& g, GeometryOpts& geo, const std::string& kind,
                       double phi_max_deg, int freq, double arc_fraction, double arc_span_deg,
                       double tilt_range_deg) {
    auto geom = geo.resolve();
    auto traj = make_trajectory(kind, geom, phi_max_deg, freq, arc_fraction, arc_span_deg,
                                tilt_range_deg, g.seed);
    fs::path dir = ensure_out_dir(g.out_dir);
    svfbp::io::write_trajectory(dir / "trajectory.json", traj, geom);

    double tilt_lo = 0.0, tilt_hi = 0.0;
    for (const auto& s : traj.sources) {
        double tilt = std::asin(s[2] / svfbp::norm3(s)) / kDegree;
        tilt_lo = std::min(tilt_lo, tilt);
        tilt_hi = std::max(tilt_hi, tilt);
    }

    json m = base_manifest("gen-trajectory", g);
    m["parameters"] = {{"kind", kind},
                       {"phi_max_deg", phi_max_deg},
                       {"freq", freq},
                       {"arc_fraction", arc_fraction},
                       {"arc_span_deg", arc_span_deg},
                       {"tilt_range_deg", tilt_range_deg}};
    m["geometry"] = svfbp::io::geometry_to_json(geom);
    m["trajectory_hash"] = svfbp::io::hex64(svfbp::trajectory_hash(traj, geom));
    m["outputs"] = {{"trajectory", "trajectory.json"}};
    write_manifest(dir, m);

    std::printf("wrote %s: %zu sources, %s, tilt range [%.2f, %.2f] deg\n",
                (dir / "trajectory.json").string().c_str(), traj.size(),
                traj.closed ? "closed" : "open", tilt_lo, tilt_hi);
    return 0;
}

int cmd_gen_dataset(const GlobalOpts& g, const std::string& trajectory_path, int n,
                    svfbp::PhantomConfig& pcfg, double train_fraction,
                    const std::vector<std::string>& volume_paths) {
    auto [traj, geom] = svfbp::io::read_trajectory(trajectory_path);
    fs::path dir = ensure_out_dir(g.out_dir);
    pcfg.seed = g.seed;

    json m = base_manifest("gen-dataset", g);
    m["trajectory_hash"] = svfbp::io::hex64(svfbp::trajectory_hash(traj, geom));
    json samples = json::array();

    std::vector<svfbp::Volume<float>> gts;
    json affine_maps = json::array();
    if (!volume_paths.empty()) {
        for (const auto& p : volume_paths) {
            auto [vol, map] = svfbp::io::load_volume<float>(p);
            json am;
            am["source"] = p;
            am["scale"] = map.scale;
            am["offset"] = map.offset;
            affine_maps.push_back(am);
            gts.push_back(std::move(vol));
        }
        n = static_cast<int>(gts.size());
        // the external grid replaces the trajectory file's volume grid
        geom.vol_nz = static_cast<int>(gts[0].data.n0());
        geom.vol_ny = static_cast<int>(gts[0].data.n1());
        geom.vol_nx = static_cast<int>(gts[0].data.n2());
        geom.vol_sz = gts[0].spacing[0];
        geom.vol_sy = gts[0].spacing[1];
        geom.vol_sx = gts[0].spacing[2];
        geom.fov_radius = gts[0].fov_radius;
        for (const auto& v : gts)
            svfbp::require(v.data.same_shape(gts[0].data), "external volumes must share one grid");
    } else {
        svfbp::require(n >= 1, "--n must be >= 1");
        pcfg.nz = geom.vol_nz;
        pcfg.ny = geom.vol_ny;
        pcfg.nx = geom.vol_nx;
        pcfg.sz = geom.vol_sz;
        pcfg.sy = geom.vol_sy;
        pcfg.sx = geom.vol_sx;
        pcfg.fov_radius = geom.fov_radius;
        pcfg.validate();
        for (int i = 0; i < n; ++i) {
            svfbp::PhantomConfig c = pcfg;
            c.seed = pcfg.seed + static_cast<std::uint64_t>(i);
            gts.push_back(svfbp::generate_phantom<float>(c));
        }
    }

    auto split = svfbp::split_dataset(static_cast<std::size_t>(n), train_fraction);
    for (int i = 0; i < n; ++i) {
        auto projs = svfbp::cone_forward(gts[static_cast<std::size_t>(i)], traj, geom);
        char gt_name[32], proj_name[32];
        std::snprintf(gt_name, sizeof(gt_name), "gt_%04d.f32", i);
        std::snprintf(proj_name, sizeof(proj_name), "proj_%04d.f32", i);
        svfbp::io::write_volume(dir / gt_name, gts[static_cast<std::size_t>(i)]);
        svfbp::io::write_projections(dir / proj_name, projs, geom.detector_spacing_y,
                                     geom.detector_spacing_x);
        bool is_train = std::find(split.train.begin(), split.train.end(),
                                  static_cast<std::size_t>(i)) != split.train.end();
        json s;
        s["id"] = i;
        s["split"] = is_train ? "train" : "val";
        s["gt"] = gt_name;
        s["gt_hash"] = svfbp::io::hex64(svfbp::io::fnv1a_file(dir / gt_name));
        s["proj"] = proj_name;
        s["proj_hash"] = svfbp::io::hex64(svfbp::io::fnv1a_file(dir / proj_name));
        samples.push_back(std::move(s));
        std::printf("sample %d/%d written (%s)\n", i + 1, n, is_train ? "train" : "val");
    }
    if (!fs::exists(dir / "trajectory.json") ||
        !fs::equivalent(fs::path(trajectory_path), dir / "trajectory.json"))
        fs::copy_file(trajectory_path, dir / "trajectory.json", fs::copy_options::overwrite_existing);

    m["parameters"] = {{"n", n},
                       {"train_fraction", train_fraction},
                       {"min_objects", pcfg.min_objects},
                       {"max_objects", pcfg.max_objects},
                       {"min_axial_cylinders", pcfg.min_axial_cylinders},
                       {"max_axial_cylinders", pcfg.max_axial_cylinders},
                       {"intensity", {pcfg.intensity_low, pcfg.intensity_high}},
                       {"semiaxis_fraction", {pcfg.semiaxis_low, pcfg.semiaxis_high}},
                       {"smooth_sigma", pcfg.smooth_sigma}};
    if (!affine_maps.empty()) m["external_volumes"] = affine_maps;
    m["geometry"] = svfbp::io::geometry_to_json(geom);
    m["samples"] = std::move(samples);
    write_manifest(dir, m);
    std::printf("dataset of %d samples written to %s (%zu train / %zu val)\n", n,
                dir.string().c_str(), split.train.size(), split.val.size());
    return 0;
}

struct LoadedDataset {
    svfbp::Trajectory traj;
    svfbp::ConeBeamGeometry geom;
    std::vector<svfbp::TrainSample<float>> train, val;
    std::uint64_t trajectory_hash = 0;
    std::uint64_t content_hash = 0;
};

LoadedDataset load_dataset(const fs::path& dir) {
    json m = svfbp::io::read_json_file(dir / "manifest.json");
    LoadedDataset ds;
    auto [traj, geom] = svfbp::io::read_trajectory(dir / "trajectory.json");
    ds.traj = std::move(traj);
    ds.geom = geom;
    ds.trajectory_hash = svfbp::trajectory_hash(ds.traj, ds.geom);
    std::string recorded = svfbp::io::sidecar_field(m, "trajectory_hash", dir / "manifest.json")
                               .get<std::string>();
    if (svfbp::io::hex64(ds.trajectory_hash) != recorded)
        svfbp::fail_consistency("trajectory hash mismatch in " + dir.string() + ": manifest " +
                                recorded + ", trajectory.json " + svfbp::io::hex64(ds.trajectory_hash));
    std::uint64_t content = 1469598103934665603ull;
    for (const auto& s : m["samples"]) {
        fs::path gt_path = dir / s["gt"].get<std::string>();
        fs::path proj_path = dir / s["proj"].get<std::string>();
        std::uint64_t gt_hash = svfbp::io::fnv1a_file(gt_path);
        std::uint64_t proj_hash = svfbp::io::fnv1a_file(proj_path);
        if (svfbp::io::hex64(gt_hash) != s["gt_hash"].get<std::string>() ||
            svfbp::io::hex64(proj_hash) != s["proj_hash"].get<std::string>())
            svfbp::fail_consistency("dataset file hash mismatch for sample " +
                                    std::to_string(s["id"].get<int>()) + " in " + dir.string());
        content = svfbp::io::fnv1a_bytes(&gt_hash, sizeof(gt_hash), content);
        content = svfbp::io::fnv1a_bytes(&proj_hash, sizeof(proj_hash), content);
        svfbp::TrainSample<float> sample;
        sample.gt = svfbp::io::read_volume<float>(gt_path);
        sample.projections = svfbp::io::read_projections<float>(proj_path);
        if (s["split"] == "train") ds.train.push_back(std::move(sample));
        else ds.val.push_back(std::move(sample));
    }
    ds.content_hash = content;
    return ds;
}

void write_checkpoint(const fs::path& dir, const svfbp::TrainState<float>& st,
                      const svfbp::SinogramGrid& grid, std::uint64_t traj_hash, int next_epoch) {
    fs::create_directories(dir);
    svfbp::io::write_weights(dir / "weights.f32", st.weights, grid, traj_hash);
    svfbp::io::write_moment(dir / "first_moment.f32", st.first_moment, st.step);
    svfbp::io::write_moment(dir / "second_moment.f32", st.second_moment, st.step);
    json state;
    state["next_epoch"] = next_epoch;
    state["step"] = st.step;
    json hist = json::array();
    for (const auto& r : st.history)
        hist.push_back({{"epoch", r.epoch},
                        {"lr", r.lr},
                        {"train_loss", r.train_loss},
                        {"val_loss", r.val_loss}});
    state["history"] = std::move(hist);
    svfbp::io::write_json_file(dir / "state.json", state);
}

int cmd_train(const GlobalOpts& g, const std::string& dataset_dir, svfbp::TrainConfig& tcfg,
              const PipelineOpts& popts, int checkpoint_every, const std::string& resume) {
    auto ds = load_dataset(dataset_dir);
    auto cfg = popts.resolve(ds.geom);
    tcfg.seed = g.seed;
    tcfg.nonneg_in_training = cfg.nonneg;
    tcfg.validate();
    fs::path dir = ensure_out_dir(g.out_dir);

    svfbp::TrainState<float> state;
    int start_epoch = 0;
    if (!resume.empty()) {
        fs::path rdir(resume);
        svfbp::SinogramGrid grid;
        std::uint64_t traj_hash = 0;
        state.weights = svfbp::io::read_weights<float>(rdir / "weights.f32", &grid, &traj_hash);
        if (traj_hash != ds.trajectory_hash)
            svfbp::fail_consistency("checkpoint trajectory hash " + svfbp::io::hex64(traj_hash) +
                                    " does not match dataset trajectory " +
                                    svfbp::io::hex64(ds.trajectory_hash));
        state.first_moment = svfbp::io::read_moment<float>(rdir / "first_moment.f32");
        state.second_moment = svfbp::io::read_moment<float>(rdir / "second_moment.f32", &state.step);
        json st = svfbp::io::read_json_file(rdir / "state.json");
        start_epoch = st["next_epoch"].get<int>();
        for (const auto& r : st["history"])
            state.history.push_back({r["epoch"].get<int>(), r["lr"].get<double>(),
                                     r["train_loss"].get<double>(), r["val_loss"].get<double>()});
    } else {
        state.weights = svfbp::init_weights<float>(ds.traj.size(), cfg.grid.num_angles,
                                                   cfg.grid.num_s, tcfg.init_low, tcfg.init_high,
                                                   tcfg.seed);
        state.first_moment =
            svfbp::Array3D<float>(state.weights.n0(), state.weights.n1(), state.weights.n2());
        state.second_moment =
            svfbp::Array3D<float>(state.weights.n0(), state.weights.n1(), state.weights.n2());
    }

    auto on_epoch = [&](const svfbp::TrainState<float>& st) {
        const auto& r = st.history.back();
        std::printf("epoch %4d  lr %.6f  train %.6e  val %.6e\n", r.epoch, r.lr, r.train_loss,
                    r.val_loss);
        std::fflush(stdout);
        if (checkpoint_every > 0 && (r.epoch + 1) % checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_%04d", r.epoch + 1);
            write_checkpoint(dir / name, st, cfg.grid, ds.trajectory_hash, r.epoch + 1);
        }
    };

    std::function<void(const svfbp::TrainState<float>&)> cb = on_epoch;
    svfbp::train_continue(state, ds.train, ds.val, ds.traj, tcfg, cfg, start_epoch, cb);

    svfbp::io::write_weights(dir / "weights.f32", state.weights, cfg.grid, ds.trajectory_hash);
    write_checkpoint(dir / "final_state", state, cfg.grid, ds.trajectory_hash, tcfg.epochs);

    std::ofstream csv(dir / "loss_curve.csv");
    csv << "epoch,lr,train_loss,val_loss\n";
    std::vector<double> train_curve, val_curve;
    for (const auto& r : state.history) {
        char line[160];
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", r.epoch, r.lr, r.train_loss,
                      r.val_loss);
        csv << line;
        train_curve.push_back(r.train_loss);
        val_curve.push_back(r.val_loss);
    }
    csv.close();
    svfbp::io::export_loss_plot(dir / "loss_curve.png", train_curve, val_curve);

    json m = base_manifest("train", g);
    m["parameters"] = {{"gamma", tcfg.gamma},
                       {"epochs", tcfg.epochs},
                       {"lr_min", tcfg.lr_min},
                       {"lr_max", tcfg.lr_max},
                       {"beta1", tcfg.opt.beta1},
                       {"beta2", tcfg.opt.beta2},
                       {"eps", tcfg.opt.eps},
                       {"weight_decay", tcfg.opt.weight_decay},
                       {"init_low", tcfg.init_low},
                       {"init_high", tcfg.init_high},
                       {"ssim_window", tcfg.ssim_window},
                       {"checkpoint_every", checkpoint_every},
                       {"resume", resume},
                       {"start_epoch", start_epoch}};
    m["pipeline"] = popts.to_json(cfg);
    m["assumptions"] = {"gamma=0.1 default (SSIM loss weight chosen here)",
                        "ssim_window=7 cubic, K1=0.01, K2=0.03, unit dynamic range",
                        "normalization=minmax per volume before the loss"};
    m["dataset"] = {{"dir", dataset_dir},
                    {"content_hash", svfbp::io::hex64(ds.content_hash)},
                    {"trajectory_hash", svfbp::io::hex64(ds.trajectory_hash)},
                    {"train_samples", ds.train.size()},
                    {"val_samples", ds.val.size()}};
    m["outputs"] = {{"weights", "weights.f32"},
                    {"loss_curve", "loss_curve.csv"},
                    {"loss_plot", "loss_curve.png"},
                    {"final_state", "final_state"}};
    m["final"] = {{"train_loss", state.history.empty() ? 0.0 : state.history.back().train_loss},
                  {"val_loss", state.history.empty() ? 0.0 : state.history.back().val_loss},
                  {"epochs_run", state.history.size()},
                  {"weights_hash", svfbp::io::hex64(svfbp::io::fnv1a_file(dir / "weights.f32"))}};
    write_manifest(dir, m);
    std::printf("training finished after %zu epochs; weights at %s\n", state.history.size(),
                (dir / "weights.f32").string().c_str());
    return 0;
}

int cmd_reconstruct(const GlobalOpts& g, const std::string& proj_path,
                    const std::string& trajectory_path, const std::string& weights_path,
                    bool analytic_circular, const PipelineOpts& popts, double window_lo,
                    double window_hi, bool window_set, int scale) {
    auto [traj, geom] = svfbp::io::read_trajectory(trajectory_path);
    auto projs = svfbp::io::read_projections<float>(proj_path);
    svfbp::require(projs.n0() == traj.size(), "projection stack length does not match trajectory");

    auto cfg = popts.resolve(geom);
    std::uint64_t traj_hash = svfbp::trajectory_hash(traj, geom);

    svfbp::Array3D<float> weights;
    if (analytic_circular) {
        weights = svfbp::analytic_circular_weights<float>(traj, cfg);
    } else {
        svfbp::require(!weights_path.empty(), "either --weights or --analytic-circular is required");
        svfbp::SinogramGrid grid;
        std::uint64_t stored_hash = 0;
        weights = svfbp::io::read_weights<float>(weights_path, &grid, &stored_hash);
        if (stored_hash != traj_hash)
            svfbp::fail_consistency("weight file was trained for trajectory " +
                                    svfbp::io::hex64(stored_hash) + " but the given trajectory is " +
                                    svfbp::io::hex64(traj_hash));
        cfg.grid = grid;
        cfg.smoothing = svfbp::SmoothingConfig::scaled_for(grid.num_s);
        if (popts.sigma >= 0.0) cfg.smoothing.sigma = popts.sigma;
        if (popts.kernel_size > 0) cfg.smoothing.kernel_size = popts.kernel_size;
        cfg.validate();
    }

    auto [recon, seconds] =
        svfbp::timed([&] { return svfbp::reconstruct(projs, weights, traj, cfg); });

    fs::path dir = ensure_out_dir(g.out_dir);
    svfbp::io::write_volume(dir / "volume.f32", recon);
    svfbp::io::Window window;
    if (window_set) window = {window_lo, window_hi, true};
    svfbp::io::export_central_slices(dir, "recon", recon, window, scale);

    json m = base_manifest("reconstruct", g);
    m["parameters"] = {
        {"projections", proj_path},
        {"trajectory", trajectory_path},
        {"weights", analytic_circular ? std::string("analytic-circular") : weights_path},
        {"scale", scale}};
    if (window_set) m["parameters"]["window"] = {window_lo, window_hi};
    m["pipeline"] = popts.to_json(cfg);
    m["inputs"] = {{"projections_hash", svfbp::io::hex64(svfbp::io::fnv1a_file(proj_path))},
                   {"trajectory_hash", svfbp::io::hex64(traj_hash)}};
    m["outputs"] = {{"volume", "volume.f32"},
                    {"slices", {"recon_axial.png", "recon_coronal.png", "recon_sagittal.png"}}};
    write_manifest(dir, m);
    std::printf("reconstructed %zux%zux%zu volume in %.2f s -> %s\n", recon.data.n0(),
                recon.data.n1(), recon.data.n2(), seconds, (dir / "volume.f32").string().c_str());
    return 0;
}

struct EvalGroup {
    std::string label;
    std::vector<std::string> paths;
};

int cmd_evaluate(const GlobalOpts& g, const std::vector<std::string>& recon_specs,
                 const std::vector<std::string>& gt_paths, bool with_time, bool per_slice) {
    svfbp::require(!recon_specs.empty(), "at least one --recon label=paths entry is required");
    svfbp::require(!gt_paths.empty(), "--gt is required");
    for (const auto& p : gt_paths)
        if (!fs::exists(p)) svfbp::fail_io("ground-truth file not found: " + p);

    std::vector<EvalGroup> groups;
    for (const auto& spec : recon_specs) {
        auto eq = spec.find('=');
        svfbp::require(eq != std::string::npos, "--recon expects label=path[,path...]: " + spec);
        EvalGroup grp;
        grp.label = spec.substr(0, eq);
        std::string rest = spec.substr(eq + 1);
        std::size_t pos = 0;
        while (true) {
            auto comma = rest.find(',', pos);
            grp.paths.push_back(rest.substr(pos, comma == std::string::npos ? comma : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        svfbp::require(grp.paths.size() == gt_paths.size(),
                       "--recon " + grp.label + " has " + std::to_string(grp.paths.size()) +
                           " paths but there are " + std::to_string(gt_paths.size()) + " --gt files");
        groups.push_back(std::move(grp));
    }

    std::vector<svfbp::Volume<float>> gts;
    for (const auto& p : gt_paths) gts.push_back(svfbp::io::read_volume<float>(p));

    fs::path dir = ensure_out_dir(g.out_dir);
    json report;
    report["gt"] = gt_paths;
    json rows = json::array();

    std::string table;
    table += "method                        MSE                  PSNR (dB)           SSIM";
    if (with_time) table += "                time (s)";
    table += "\n";

    for (const auto& grp : groups) {
        std::vector<double> mses, psnrs, ssims, times;
        json per_sample = json::array();
        for (std::size_t i = 0; i < grp.paths.size(); ++i) {
            if (!fs::exists(grp.paths[i])) svfbp::fail_io("reconstruction not found: " + grp.paths[i]);
            auto recon = svfbp::io::read_volume<float>(grp.paths[i]);
            if (!recon.data.same_shape(gts[i].data))
                svfbp::fail_consistency("shape mismatch: " + grp.paths[i] + " vs " + gt_paths[i]);
            auto [metrics, secs] = svfbp::timed([&] {
                return per_slice ? svfbp::evaluate_per_slice(recon, gts[i])
                                 : svfbp::evaluate(recon, gts[i]);
            });
            mses.push_back(metrics.mse);
            psnrs.push_back(metrics.psnr_db);
            ssims.push_back(metrics.ssim);
            times.push_back(secs);
            per_sample.push_back({{"recon", grp.paths[i]},
                                  {"mse", metrics.mse},
                                  {"psnr_db", metrics.psnr_db},
                                  {"ssim", metrics.ssim}});
        }
        auto ms = svfbp::summarize(mses);
        auto ps = svfbp::summarize(psnrs);
        auto ss = svfbp::summarize(ssims);
        auto ts = svfbp::summarize(times);
        char line[256];
        if (with_time)
            std::snprintf(line, sizeof(line),
                          "%-22s %9.4f +- %-8.4f %8.2f +- %-8.2f %7.4f +- %-8.4f %8.3f\n",
                          grp.label.c_str(), ms.mean, ms.stddev, ps.mean, ps.stddev, ss.mean,
                          ss.stddev, ts.mean);
        else
            std::snprintf(line, sizeof(line), "%-22s %9.4f +- %-8.4f %8.2f +- %-8.2f %7.4f +- %-8.4f\n",
                          grp.label.c_str(), ms.mean, ms.stddev, ps.mean, ps.stddev, ss.mean,
                          ss.stddev);
        table += line;
        json row;
        row["label"] = grp.label;
        row["mse"] = {{"mean", ms.mean}, {"stddev", ms.stddev}};
        row["psnr_db"] = {{"mean", ps.mean}, {"stddev", ps.stddev}};
        row["ssim"] = {{"mean", ss.mean}, {"stddev", ss.stddev}};
        if (with_time) row["metric_time_s"] = {{"mean", ts.mean}, {"stddev", ts.stddev}};
        row["samples"] = std::move(per_sample);
        rows.push_back(std::move(row));
    }
    report["rows"] = std::move(rows);
    report["per_slice_ssim"] = per_slice;

    svfbp::io::write_json_file(dir / "report.json", report);
    std::ofstream txt(dir / "report.txt");
    txt << table;
    txt.close();
    std::fputs(table.c_str(), stdout);

    json m = base_manifest("evaluate", g);
    m["parameters"] = {{"per_slice", per_slice}, {"time", with_time}};
    m["outputs"] = {{"report_json", "report.json"}, {"report_txt", "report.txt"}};
    write_manifest(dir, m);
    return 0;
}

int cmd_export_weights(const GlobalOpts& g, const std::string& weights_path,
                       std::vector<int> lambdas, int scale) {
    svfbp::SinogramGrid grid;
    std::uint64_t traj_hash = 0;
    auto w = svfbp::io::read_weights<float>(weights_path, &grid, &traj_hash);
    for (int l : lambdas)
        if (l < 0 || static_cast<std::size_t>(l) >= w.n0())
            svfbp::fail_validation("lambda index " + std::to_string(l) + " out of range [0, " +
                                   std::to_string(w.n0()) + ")");
    if (lambdas.empty()) lambdas.push_back(0);

    // shared color scale over the requested slices
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int l : lambdas) {
        const float* slab = w.slab(static_cast<std::size_t>(l));
        for (std::size_t i = 0; i < w.n1() * w.n2(); ++i) {
            lo = std::min(lo, static_cast<double>(slab[i]));
            hi = std::max(hi, static_cast<double>(slab[i]));
        }
    }
    fs::path dir = ensure_out_dir(g.out_dir);
    json outputs = json::array();
    for (int l : lambdas) {
        svfbp::Array2D<float> slice = svfbp::slice0(w, static_cast<std::size_t>(l));
        char name[48];
        std::snprintf(name, sizeof(name), "weights_lambda_%04d.png", l);
        svfbp::io::export_heatmap(dir / name, slice, lo, hi, scale);
        outputs.push_back(name);
    }
    json m = base_manifest("export-weights", g);
    m["parameters"] = {{"weights", weights_path}, {"lambdas", lambdas}, {"scale", scale}};
    m["inputs"] = {{"weights_hash", svfbp::io::hex64(svfbp::io::fnv1a_file(weights_path))},
                   {"trajectory_hash", svfbp::io::hex64(traj_hash)}};
    m["color_scale"] = {lo, hi};
    m["outputs"] = outputs;
    write_manifest(dir, m);
    std::printf("wrote %zu heatmaps to %s (scale [%g, %g])\n", lambdas.size(), dir.string().c_str(),
                lo, hi);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shift-variant cone-beam FBP with trainable redundancy weights"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a TOML-style config file");

    GlobalOpts g;

    // gen-trajectory
    auto* gen_traj = app.add_subcommand("gen-trajectory", "generate a source orbit file");
    GeometryOpts geo;
    geo.add_flags(gen_traj);
    std::string kind;
    double phi_max_deg = 20.0, arc_fraction = 0.125, arc_span_deg = 40.0, tilt_range_deg = 10.0;
    int freq = 5;
    gen_traj->add_option("--kind", kind, "circular | sinusoidal | circle-plus-arc | random-nn")
        ->required()
        ->check(CLI::IsMember({"circular", "sinusoidal", "circle-plus-arc", "random-nn"}));
    gen_traj->add_option("--phi-max", phi_max_deg, "sinusoidal: maximum tilt (deg)")
        ->capture_default_str();
    gen_traj->add_option("--freq", freq, "sinusoidal: tilt periods per rotation")
        ->capture_default_str();
    gen_traj
        ->add_option("--arc-fraction", arc_fraction, "circle-plus-arc: fraction of points on the arc")
        ->capture_default_str();
    gen_traj->add_option("--arc-span", arc_span_deg, "circle-plus-arc: arc span (deg)")
        ->capture_default_str();
    gen_traj->add_option("--tilt-range", tilt_range_deg, "random-nn: tilt half-range (deg)")
        ->capture_default_str();

    // gen-dataset
    auto* gen_ds = app.add_subcommand("gen-dataset", "generate phantoms and their projections");
    std::string trajectory_path;
    int n_samples = 10;
    double train_fraction = 0.8;
    svfbp::PhantomConfig pcfg;
    std::vector<std::string> volume_paths;
    gen_ds->add_option("--trajectory", trajectory_path, "trajectory.json path")->required();
    gen_ds->add_option("--n", n_samples, "number of samples")->capture_default_str();
    gen_ds->add_option("--train-fraction", train_fraction, "train split fraction")
        ->capture_default_str();
    gen_ds->add_option("--min-objects", pcfg.min_objects)->capture_default_str();
    gen_ds->add_option("--max-objects", pcfg.max_objects)->capture_default_str();
    gen_ds->add_option("--min-axial-cylinders", pcfg.min_axial_cylinders)->capture_default_str();
    gen_ds->add_option("--max-axial-cylinders", pcfg.max_axial_cylinders)->capture_default_str();
    gen_ds->add_option("--intensity-low", pcfg.intensity_low)->capture_default_str();
    gen_ds->add_option("--intensity-high", pcfg.intensity_high)->capture_default_str();
    gen_ds->add_option("--semiaxis-low", pcfg.semiaxis_low, "fraction of the support radius")
        ->capture_default_str();
    gen_ds->add_option("--semiaxis-high", pcfg.semiaxis_high)->capture_default_str();
    gen_ds->add_option("--smooth-sigma", pcfg.smooth_sigma, "voxels")->capture_default_str();
    gen_ds->add_option("--volumes", volume_paths,
                       "use externally supplied volume files as ground truth instead of phantoms");

    // train
    auto* train_cmd = app.add_subcommand("train", "learn redundancy weights from a dataset");
    std::string dataset_dir, resume;
    svfbp::TrainConfig tcfg;
    PipelineOpts train_pipe;
    int checkpoint_every = 0;
    train_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
    train_cmd->add_option("--gamma", tcfg.gamma, "SSIM loss weight")->capture_default_str();
    train_cmd->add_option("--epochs", tcfg.epochs)->capture_default_str();
    train_cmd->add_option("--lr-min", tcfg.lr_min)->capture_default_str();
    train_cmd->add_option("--lr-max", tcfg.lr_max)->capture_default_str();
    train_cmd->add_option("--beta1", tcfg.opt.beta1)->capture_default_str();
    train_cmd->add_option("--beta2", tcfg.opt.beta2)->capture_default_str();
    train_cmd->add_option("--eps", tcfg.opt.eps)->capture_default_str();
    train_cmd->add_option("--weight-decay", tcfg.opt.weight_decay)->capture_default_str();
    train_cmd->add_option("--init-low", tcfg.init_low)->capture_default_str();
    train_cmd->add_option("--init-high", tcfg.init_high)->capture_default_str();
    train_cmd->add_option("--ssim-window", tcfg.ssim_window)->capture_default_str();
    train_cmd->add_flag("--early-stop", tcfg.early_stop, "stop on stalled validation loss");
    train_cmd->add_option("--patience", tcfg.patience)->capture_default_str();
    train_cmd
        ->add_option("--checkpoint-every", checkpoint_every, "epochs between checkpoints (0: off)")
        ->capture_default_str();
    train_cmd->add_option("--resume", resume, "checkpoint directory to continue from");
    train_pipe.add_flags(train_cmd);

    // reconstruct
    auto* rec_cmd = app.add_subcommand("reconstruct", "filtered backprojection with given weights");
    std::string proj_path, rec_traj_path, weights_path;
    bool analytic_circular = false;
    PipelineOpts rec_pipe;
    int png_scale = 4;
    rec_cmd->add_option("--projections", proj_path, "projection stack (.f32)")->required();
    rec_cmd->add_option("--trajectory", rec_traj_path, "trajectory.json path")->required();
    rec_cmd->add_option("--weights", weights_path, "trained weight file (.f32)");
    rec_cmd->add_flag("--analytic-circular", analytic_circular,
                      "use the closed-form circular-orbit weights");
    auto* win_opt =
        rec_cmd->add_option("--window", "fixed display window LO HI for the slice PNGs")->expected(2);
    rec_cmd->add_option("--scale", png_scale, "nearest-neighbor upscale of the slice PNGs")
        ->capture_default_str();
    rec_pipe.add_flags(rec_cmd);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "image-quality report against ground truth");
    std::vector<std::string> recon_specs, gt_paths;
    bool with_time = false, per_slice = false;
    eval_cmd->add_option("--recon", recon_specs, "label=path[,path...] (repeatable)")->required();
    eval_cmd->add_option("--gt", gt_paths, "ground-truth volume(s)")->required();
    eval_cmd->add_flag("--time", with_time, "report metric computation time");
    eval_cmd->add_flag("--per-slice", per_slice, "slice-level SSIM (11x11 window)");

    // export-weights
    auto* exp_cmd = app.add_subcommand("export-weights", "heatmap images of weight slices");
    std::string exp_weights;
    std::vector<int> lambdas;
    int heat_scale = 4;
    exp_cmd->add_option("--weights", exp_weights, "weight file (.f32)")->required();
    exp_cmd->add_option("--lambdas", lambdas, "projection indices to export");
    exp_cmd->add_option("--scale", heat_scale)->capture_default_str();

    for (auto* cmd : {gen_traj, gen_ds, train_cmd, rec_cmd, eval_cmd, exp_cmd}) {
        cmd->add_option("--out", g.out_dir, "output directory");
        cmd->add_option("--seed", g.seed, "random seed")->capture_default_str();
        cmd->add_option("--threads", g.threads, "worker thread cap (0: library default)")
            ->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    apply_threads(g.threads);
    try {
        if (gen_traj->parsed())
            return cmd_gen_trajectory(g, geo, kind, phi_max_deg, freq, arc_fraction, arc_span_deg,
                                      tilt_range_deg);
        if (gen_ds->parsed())
            return cmd_gen_dataset(g, trajectory_path, n_samples, pcfg, train_fraction, volume_paths);
        if (train_cmd->parsed())
            return cmd_train(g, dataset_dir, tcfg, train_pipe, checkpoint_every, resume);
        if (rec_cmd->parsed()) {
            bool window_set = win_opt->count() > 0;
            double window_lo = 0.0, window_hi = 1.0;
            if (window_set) {
                auto vals = win_opt->results();
                window_lo = std::stod(vals[0]);
                window_hi = std::stod(vals[1]);
            }
            return cmd_reconstruct(g, proj_path, rec_traj_path, weights_path, analytic_circular,
                                   rec_pipe, window_lo, window_hi, window_set, png_scale);
        }
        if (eval_cmd->parsed()) return cmd_evaluate(g, recon_specs, gt_paths, with_time, per_slice);
        if (exp_cmd->parsed()) return cmd_export_weights(g, exp_weights, lambdas, heat_scale);
    } catch (const svfbp::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
