#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "corona/commands.hpp"
#include "corona/errors.hpp"
#include "corona/npy.hpp"
#include "test_util.hpp"

using namespace corona;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("npy: complex64 write -> read -> write is file-identical") {
    const fs::path dir = temp_dir("corona_npy");
    std::mt19937_64 rng(91);
    const MovieTensor m = test::random_movie(3, 4, 5, rng);
    write_movie(m, dir / "a.npy");
    const MovieTensor back = read_movie(dir / "a.npy");
    write_movie(back, dir / "b.npy");
    CHECK(file_bytes(dir / "a.npy") == file_bytes(dir / "b.npy"));
}

TEST_CASE("npy: complex128 round trip is value-exact") {
    const fs::path dir = temp_dir("corona_npy16");
    std::mt19937_64 rng(92);
    const MovieTensor m = test::random_movie(2, 3, 3, rng);
    write_movie(m, dir / "a.npy", NpyComplexDtype::Complex128);
    const MovieTensor back = read_movie(dir / "a.npy");
    CHECK(back.data() == m.data());
}

TEST_CASE("npy: header grammar on a hand-built file") {
    const fs::path dir = temp_dir("corona_npy_hand");
    // Construct the byte-level fixture manually: one 1x1x2 <c8 movie.
    std::string header = "{'descr': '<c8', 'fortran_order': False, 'shape': (1, 1, 2), }";
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((unpadded + 63) / 64 * 64 - unpadded, ' ');
    header.push_back('\n');
    std::string blob = "\x93NUMPY";
    blob.push_back('\x01');
    blob.push_back('\x00');
    const std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
    blob.append(reinterpret_cast<const char*>(&hlen), 2);
    blob += header;
    const float payload[4] = {1.5f, -2.0f, 0.25f, 8.0f};
    blob.append(reinterpret_cast<const char*>(payload), sizeof(payload));
    {
        std::ofstream out(dir / "hand.npy", std::ios::binary);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    }

    const MovieTensor m = read_movie(dir / "hand.npy");
    REQUIRE(m.frames() == 1);
    REQUIRE(m.height() == 1);
    REQUIRE(m.width() == 2);
    CHECK(m.at(0, 0, 0) == Complex(1.5, -2.0));
    CHECK(m.at(0, 0, 1) == Complex(0.25, 8.0));

    // The writer produces the same bytes for the same movie.
    write_movie(m, dir / "rewritten.npy");
    CHECK(file_bytes(dir / "rewritten.npy") == blob);
}

TEST_CASE("npy: rank and dtype rejection") {
    const fs::path dir = temp_dir("corona_npy_bad");
    Eigen::MatrixXd mat(2, 2);
    mat << 1, 2, 3, 4;
    write_matrix(mat, dir / "mat.npy");
    CHECK_THROWS_AS(read_movie(dir / "mat.npy"), IoError);  // rank-2, wrong dtype

    const Eigen::MatrixXd round = read_matrix(dir / "mat.npy");
    CHECK(round == mat);

    std::ofstream junk(dir / "junk.npy", std::ios::binary);
    junk << "not an npy file";
    junk.close();
    CHECK_THROWS_AS(read_movie(dir / "junk.npy"), IoError);
}

TEST_CASE("manifest: round trip and missing-file detection") {
    const fs::path dir = temp_dir("corona_manifest");
    std::mt19937_64 rng(93);
    const MovieTensor m = test::random_movie(2, 3, 3, rng);
    write_movie(m, dir / "d.npy");
    write_movie(m, dir / "l.npy");
    write_movie(m, dir / "s.npy");

    DatasetManifest manifest;
    manifest.samples.push_back({"d.npy", "l.npy", "s.npy", 5, 2, 3, 3, "simulated"});
    write_manifest(manifest, dir / "manifest.json");
    const DatasetManifest back = read_manifest(dir / "manifest.json");
    REQUIRE(back.samples.size() == 1);
    CHECK(back.samples[0].seed == 5);
    CHECK(back.samples[0].provenance == "simulated");

    manifest.samples[0].d = "missing.npy";
    write_manifest(manifest, dir / "broken.json");
    CHECK_THROWS_AS(read_manifest(dir / "broken.json"), IoError);
}

TEST_CASE("cmd_simulate: files + manifest + idempotence") {
    const fs::path dir = temp_dir("corona_sim_cmd");
    SimulateCmd cmd;
    cmd.sim.height = 16;
    cmd.sim.width = 16;
    cmd.sim.frames = 6;
    cmd.sim.seed = 4242;
    cmd.samples = 1;
    cmd.out_dir = dir / "run1";
    const fs::path manifest_path = cmd_simulate(cmd);

    CHECK(fs::exists(dir / "run1" / "sample_0000_D.npy"));
    CHECK(fs::exists(dir / "run1" / "sample_0000_L.npy"));
    CHECK(fs::exists(dir / "run1" / "sample_0000_S.npy"));
    CHECK(fs::exists(dir / "run1" / "config_echo.json"));
    const DatasetManifest manifest = read_manifest(manifest_path);
    REQUIRE(manifest.samples.size() == 1);

    // Manifest shapes match the file headers.
    const MovieTensor d = read_movie(dir / "run1" / manifest.samples[0].d);
    CHECK(d.frames() == manifest.samples[0].frames);
    CHECK(d.height() == manifest.samples[0].height);
    CHECK(d.width() == manifest.samples[0].width);

    // Same seed -> byte-identical artifacts.
    cmd.out_dir = dir / "run2";
    cmd_simulate(cmd);
    CHECK(file_bytes(dir / "run1" / "sample_0000_D.npy") ==
          file_bytes(dir / "run2" / "sample_0000_D.npy"));
    CHECK(file_bytes(dir / "run1" / "manifest.json") ==
          file_bytes(dir / "run2" / "manifest.json"));
}

TEST_CASE("cmd_solve: svd cut_rank 0 output equals input") {
    const fs::path dir = temp_dir("corona_solve_cmd");
    std::mt19937_64 rng(94);
    const MovieTensor d = test::random_movie(6, 8, 8, rng);
    write_movie(d, dir / "d.npy");

    SolveCmd cmd;
    cmd.input = dir / "d.npy";
    cmd.method = "svd";
    cmd.svd_cfg.cut_rank = 0;
    cmd.out_dir = dir / "out";
    cmd_solve(cmd);

    const MovieTensor filtered = read_movie(dir / "out" / "filtered.npy");
    // Through complex64 storage: compare at single precision.
    const MovieTensor d_c8 = read_movie(dir / "d.npy");
    CHECK(test::rel_err(filtered, d_c8) <= 1e-6);
    CHECK(fs::exists(dir / "out" / "solve_log.jsonl"));
    CHECK(fs::exists(dir / "out" / "config_echo.json"));
}

TEST_CASE("cmd_solve: patchwise equals whole-movie when the movie is one patch") {
    const fs::path dir = temp_dir("corona_solve_patch");
    std::mt19937_64 rng(95);
    const MovieTensor d = test::random_movie(6, 8, 8, rng);
    write_movie(d, dir / "d.npy");

    SolveCmd whole;
    whole.input = dir / "d.npy";
    whole.method = "fista";
    whole.solver.max_iters = 40;
    whole.out_dir = dir / "whole";
    cmd_solve(whole);

    SolveCmd patch = whole;
    patch.patchwise = true;
    patch.patch_shape = {6, 8, 8};
    patch.out_dir = dir / "patch";
    cmd_solve(patch);

    CHECK(file_bytes(dir / "whole" / "S.npy") == file_bytes(dir / "patch" / "S.npy"));
    CHECK(file_bytes(dir / "whole" / "L.npy") == file_bytes(dir / "patch" / "L.npy"));
}

TEST_CASE("cmd_solve: fista on a simulated sample logs finite MSE") {
    const fs::path dir = temp_dir("corona_solve_sim");
    SimulateCmd sim;
    sim.sim.height = 16;
    sim.sim.width = 16;
    sim.sim.frames = 6;
    sim.sim.seed = 777;
    sim.out_dir = dir / "data";
    cmd_simulate(sim);

    SolveCmd cmd;
    cmd.input = dir / "data" / "sample_0000_D.npy";
    cmd.method = "fista";
    cmd.solver.max_iters = 30;
    cmd.truth_l = dir / "data" / "sample_0000_L.npy";
    cmd.truth_s = dir / "data" / "sample_0000_S.npy";
    cmd.out_dir = dir / "out";
    cmd_solve(cmd);

    CHECK(fs::exists(dir / "out" / "S.npy"));
    const std::string log = file_bytes(dir / "out" / "solve_log.jsonl");
    CHECK(log.find("\"mse_s\"") != std::string::npos);
    CHECK(log.find("nan") == std::string::npos);
}

TEST_CASE("cmd_train: zero epochs leaves the initialization; history line count") {
    const fs::path dir = temp_dir("corona_train_cmd");
    SimulateCmd sim;
    sim.sim.height = 16;
    sim.sim.width = 16;
    sim.sim.frames = 6;
    sim.sim.seed = 31;
    sim.samples = 2;
    sim.out_dir = dir / "data";
    const fs::path manifest = cmd_simulate(sim);

    TrainCmd cmd;
    cmd.stage1_manifest = manifest;
    cmd.layers = 1;
    cmd.train.epochs_stage1 = 0;
    cmd.train.epochs_stage2 = 0;
    cmd.train.seed = 11;
    cmd.train.patch_shape = {6, 16, 16};
    cmd.out_dir = dir / "out0";
    cmd_train(cmd);
    CHECK(fs::exists(dir / "out0" / "weights.bin"));
    CHECK(file_bytes(dir / "out0" / "history.jsonl").empty());

    cmd.train.epochs_stage1 = 2;
    cmd.out_dir = dir / "out2";
    cmd_train(cmd);
    const std::string history = file_bytes(dir / "out2" / "history.jsonl");
    int lines = 0;
    for (char c : history)
        if (c == '\n') ++lines;
    CHECK(lines == 2);
    CHECK(fs::exists(dir / "out2" / "weights_epoch_001.bin"));
    CHECK(fs::exists(dir / "out2" / "weights_epoch_002.bin"));
}

TEST_CASE("cmd_train: resume continues the optimizer step counter") {
    const fs::path dir = temp_dir("corona_train_resume");
    SimulateCmd sim;
    sim.sim.height = 16;
    sim.sim.width = 16;
    sim.sim.frames = 6;
    sim.sim.seed = 77;
    sim.out_dir = dir / "data";
    const fs::path manifest = cmd_simulate(sim);

    TrainCmd cmd;
    cmd.stage1_manifest = manifest;
    cmd.layers = 1;
    cmd.train.epochs_stage1 = 2;
    cmd.train.seed = 3;
    cmd.train.batch_size = 2;
    cmd.train.patch_shape = {6, 16, 16};
    cmd.out_dir = dir / "a";
    cmd_train(cmd);

    TrainCmd resume = cmd;
    resume.resume = dir / "a" / "weights.bin";
    resume.train.epochs_stage1 = 1;
    resume.out_dir = dir / "b";
    cmd_train(resume);

    // The resumed run's saved optimizer state starts beyond the first run's.
    // Steps per epoch = 1 batch (1 pair), so run a = 2 steps, resumed = 3.
    const std::string adam_a = file_bytes(dir / "a" / "weights.bin.adam");
    const std::string adam_b = file_bytes(dir / "b" / "weights.bin.adam");
    double step_a, step_b;
    std::memcpy(&step_a, adam_a.data() + 12, 8);
    std::memcpy(&step_b, adam_b.data() + 12, 8);
    CHECK(step_b == step_a + 1.0);
}

TEST_CASE("cmd_eval: report fields and dB image normalization") {
    const fs::path dir = temp_dir("corona_eval_cmd");
    std::mt19937_64 rng(96);
    MovieTensor s = test::random_movie(4, 8, 8, rng);
    write_movie(s, dir / "s.npy");

    EvalCmd cmd;
    cmd.pred_s = dir / "s.npy";
    cmd.truth_s = dir / "s.npy";
    cmd.roi_signal = RoiBox{0, 0, 3, 3};
    cmd.roi_background = RoiBox{4, 4, 3, 3};
    cmd.profile_row = 2;
    cmd.out_dir = dir / "out";
    cmd_eval(cmd);

    const std::string report = file_bytes(dir / "out" / "report.json");
    CHECK(report.find("\"mse_s\": 0.0") != std::string::npos);
    CHECK(report.find("cnr_db") != std::string::npos);
    CHECK(report.find("cr_db") != std::string::npos);
    CHECK(report.find("profile_db") != std::string::npos);

    const Eigen::MatrixXd db = read_matrix(dir / "out" / "mip_s_db.npy");
    CHECK(db.maxCoeff() == doctest::Approx(0.0));
    CHECK(fs::exists(dir / "out" / "mip_s.pgm"));
}

TEST_CASE("write_pgm produces a valid 8-bit header") {
    const fs::path dir = temp_dir("corona_pgm");
    Eigen::MatrixXd db(2, 3);
    db << 0.0, -30.0, -60.0, -10.0, -20.0, -60.0;
    write_pgm(db, -60.0, dir / "img.pgm");
    const std::string bytes = file_bytes(dir / "img.pgm");
    CHECK(bytes.rfind("P5\n3 2\n255\n", 0) == 0);
    CHECK(bytes.size() == std::string("P5\n3 2\n255\n").size() + 6);
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 6]) == 255);  // 0 dB -> 255
}
