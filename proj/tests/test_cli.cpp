#include <doctest.h>

// Drives the installed binary end to end: exit codes, artifact determinism,
// and checkpoint resume.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const std::string cli = SVFBP_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("svfbp_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
    std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// tiny geometry keeps every CLI invocation fast
const std::string geo_flags =
    " --vol-nz 24 --vol-ny 24 --vol-nx 24 --voxel-size-z 2 --voxel-size-y 2 --voxel-size-x 2"
    " --detector-rows 32 --detector-cols 32 --pixel-size-y 4 --pixel-size-x 4 --num-projections 12";

}  // namespace

TEST_CASE("usage errors exit with code 2 and produce no files") {
    TempDir tmp;
    fs::path out = tmp.path / "out";
    CHECK(run("gen-trajectory --kind warp --out " + out.string()) == 2);
    CHECK(run("gen-trajectory --out " + out.string()) == 2);  // missing required --kind
    CHECK_FALSE(fs::exists(out / "trajectory.json"));
    CHECK(run("no-such-command") == 2);
    CHECK(run("evaluate --recon a=missing.f32 --gt also_missing.f32 --out " + out.string()) == 2);
    CHECK(run("--help") == 0);
}

TEST_CASE("gen-trajectory + gen-dataset + train + reconstruct + evaluate round trip") {
    TempDir tmp;
    auto p = [&](const std::string& s) { return (tmp.path / s).string(); };
    REQUIRE(run("gen-trajectory --kind sinusoidal --phi-max 20 --freq 5" + geo_flags + " --out " +
                p("traj")) == 0);
    REQUIRE(fs::exists(tmp.path / "traj/trajectory.json"));
    REQUIRE(run("gen-dataset --trajectory " + p("traj/trajectory.json") + " --n 3 --seed 5 --out " +
                p("ds")) == 0);
    REQUIRE(run("train --dataset " + p("ds") +
                " --epochs 2 --lr-min 0.001 --lr-max 0.001 --init-low -0.05 --init-high 0"
                " --seed 2 --out " +
                p("run")) == 0);
    REQUIRE(run("reconstruct --projections " + p("ds/proj_0002.f32") + " --trajectory " +
                p("ds/trajectory.json") + " --weights " + p("run/weights.f32") + " --out " +
                p("rec")) == 0);
    CHECK(fs::exists(tmp.path / "rec/volume.f32"));
    CHECK(fs::exists(tmp.path / "rec/recon_axial.png"));
    CHECK(fs::exists(tmp.path / "rec/recon_coronal.png"));
    CHECK(fs::exists(tmp.path / "rec/recon_sagittal.png"));
    CHECK(run("evaluate --recon learned=" + p("rec/volume.f32") + " --gt " + p("ds/gt_0002.f32") +
              " --out " + p("eval")) == 0);
    CHECK(fs::exists(tmp.path / "eval/report.json"));
    CHECK(fs::exists(tmp.path / "eval/report.txt"));
    CHECK(run("export-weights --weights " + p("run/weights.f32") + " --lambdas 0 3 --out " +
              p("wexp")) == 0);
    CHECK(fs::exists(tmp.path / "wexp/weights_lambda_0000.png"));
    CHECK(fs::exists(tmp.path / "wexp/weights_lambda_0003.png"));

    SUBCASE("lambda out of range exits 2") {
        CHECK(run("export-weights --weights " + p("run/weights.f32") + " --lambdas 99 --out " +
                  p("wbad")) == 2);
    }
    SUBCASE("trajectory hash mismatch exits 3") {
        REQUIRE(run("gen-trajectory --kind circular" + geo_flags + " --out " + p("traj2")) == 0);
        CHECK(run("reconstruct --projections " + p("ds/proj_0002.f32") + " --trajectory " +
                  p("traj2/trajectory.json") + " --weights " + p("run/weights.f32") + " --out " +
                  p("rec_bad")) == 3);
    }
    SUBCASE("analytic weights on a non-circular orbit exit 2") {
        CHECK(run("reconstruct --projections " + p("ds/proj_0002.f32") + " --trajectory " +
                  p("ds/trajectory.json") + " --analytic-circular --out " + p("rec_bad2")) == 2);
    }
    SUBCASE("evaluate shape mismatch exits 3") {
        REQUIRE(run("gen-trajectory --kind circular --out " + p("traj_small") +
                    " --vol-nz 16 --vol-ny 16 --vol-nx 16 --detector-rows 32 --detector-cols 32"
                    " --pixel-size-y 4 --pixel-size-x 4 --num-projections 12") == 0);
        REQUIRE(run("gen-dataset --trajectory " + p("traj_small/trajectory.json") +
                    " --n 2 --seed 1 --out " + p("ds_small")) == 0);
        CHECK(run("evaluate --recon learned=" + p("rec/volume.f32") + " --gt " +
                  p("ds_small/gt_0000.f32") + " --out " + p("eval_bad")) == 3);
    }
}

TEST_CASE("rerunning a command with the same inputs is byte-identical") {
    TempDir tmp;
    auto p = [&](const std::string& s) { return (tmp.path / s).string(); };
    REQUIRE(run("gen-trajectory --kind random-nn --tilt-range 10 --seed 42" + geo_flags + " --out " +
                p("t1")) == 0);
    REQUIRE(run("gen-trajectory --kind random-nn --tilt-range 10 --seed 42" + geo_flags + " --out " +
                p("t2")) == 0);
    CHECK(file_bytes(tmp.path / "t1/trajectory.json") == file_bytes(tmp.path / "t2/trajectory.json"));
    CHECK(file_bytes(tmp.path / "t1/manifest.json") == file_bytes(tmp.path / "t2/manifest.json"));

    REQUIRE(run("gen-dataset --trajectory " + p("t1/trajectory.json") + " --n 2 --seed 9 --out " +
                p("d1")) == 0);
    REQUIRE(run("gen-dataset --trajectory " + p("t1/trajectory.json") + " --n 2 --seed 9 --out " +
                p("d2")) == 0);
    for (const char* f :
         {"gt_0000.f32", "gt_0001.f32", "proj_0000.f32", "proj_0001.f32", "manifest.json"})
        CHECK(file_bytes(tmp.path / "d1" / f) == file_bytes(tmp.path / "d2" / f));
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run bitwise") {
    TempDir tmp;
    auto p = [&](const std::string& s) { return (tmp.path / s).string(); };
    REQUIRE(run("gen-trajectory --kind circular" + geo_flags + " --out " + p("traj")) == 0);
    REQUIRE(run("gen-dataset --trajectory " + p("traj/trajectory.json") + " --n 3 --seed 4 --out " +
                p("ds")) == 0);
    // varying learning rate makes the schedule sensitive to epoch numbering
    std::string train_flags =
        " --epochs 6 --lr-min 0.0005 --lr-max 0.002 --init-low -0.05 --init-high 0 --seed 11";
    REQUIRE(run("train --dataset " + p("ds") + train_flags + " --checkpoint-every 3 --out " +
                p("full")) == 0);
    REQUIRE(fs::exists(tmp.path / "full/ckpt_0003/state.json"));
    REQUIRE(run("train --dataset " + p("ds") + train_flags + " --resume " + p("full/ckpt_0003") +
                " --out " + p("resumed")) == 0);
    CHECK(file_bytes(tmp.path / "full/weights.f32") == file_bytes(tmp.path / "resumed/weights.f32"));
    CHECK(file_bytes(tmp.path / "full/loss_curve.csv") ==
          file_bytes(tmp.path / "resumed/loss_curve.csv"));
}

TEST_CASE("dataset tampering is caught as a consistency error") {
    TempDir tmp;
    auto p = [&](const std::string& s) { return (tmp.path / s).string(); };
    REQUIRE(run("gen-trajectory --kind circular" + geo_flags + " --out " + p("traj")) == 0);
    REQUIRE(run("gen-dataset --trajectory " + p("traj/trajectory.json") + " --n 2 --seed 4 --out " +
                p("ds")) == 0);
    {
        std::fstream f(tmp.path / "ds/gt_0000.f32", std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(100);
        char c = 0x5a;
        f.write(&c, 1);
    }
    CHECK(run("train --dataset " + p("ds") +
              " --epochs 1 --lr-min 0.001 --lr-max 0.001 --init-low -0.05 --init-high 0 --out " +
              p("run")) == 3);
}
