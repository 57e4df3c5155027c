#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "corona/baselines.hpp"
#include "corona/metrics.hpp"
#include "corona/sim.hpp"
#include "corona/solver.hpp"
#include "corona/training.hpp"

namespace corona {

/// One dataset entry: a (D, L, S) movie triple on disk.
struct ManifestEntry {
    std::string d, l, s;  // paths relative to the manifest
    std::uint64_t seed = 0;
    int frames = 0, height = 0, width = 0;
    std::string provenance = "simulated";
};

struct DatasetManifest {
    std::vector<ManifestEntry> samples;
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Load and validate: referenced files must exist and header shapes must
/// agree with the manifest.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Atomic small-file write (temp + rename).
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// 8-bit PGM of a dB image; [floor_db, 0] maps to [0, 255].
void write_pgm(const Eigen::MatrixXd& db_image, double floor_db,
               const std::filesystem::path& path);

// --------------------------------------------------------------------------
// Subcommands
// --------------------------------------------------------------------------

struct SimulateCmd {
    sim::SimConfig sim;
    int samples = 1;
    std::filesystem::path out_dir;
};

/// Writes D/L/S triples plus manifest.json and config_echo.json; sample i
/// uses seed sim.seed + i. Returns the manifest path.
std::filesystem::path cmd_simulate(const SimulateCmd& cmd);

struct SolveCmd {
    std::filesystem::path input;  // D movie (NPY)
    std::string method = "fista";  // ista | fista | svd | wall
    SolverConfig solver;
    SvdFilterConfig svd_cfg;
    WallFilterConfig wall_cfg;
    bool patchwise = false;
    PatchShape patch_shape;
    double overlap = 0.5;
    std::optional<std::filesystem::path> truth_l, truth_s;  // enables MSE logging
    std::filesystem::path out_dir;
};

/// Runs the chosen method; writes L.npy / S.npy (solvers) or filtered.npy
/// (baselines), a line-delimited log, and a config echo.
void cmd_solve(const SolveCmd& cmd);

struct LabelCmd {
    std::filesystem::path input_manifest;
    SolverConfig solver;
    PatchShape patch_shape;
    double overlap = 0.5;
    std::filesystem::path out_dir;
};

/// Extracts patches from every D movie in the manifest and decomposes each
/// with the momentum solver; writes patch triples plus a dataset manifest
/// tagged solver-labeled. Returns the manifest path.
std::filesystem::path cmd_label(const LabelCmd& cmd);

struct TrainCmd {
    std::filesystem::path stage1_manifest;
    std::optional<std::filesystem::path> stage2_manifest;
    TrainConfig train;
    int layers = 10;
    std::string init = "ista";  // ista | random
    std::optional<std::filesystem::path> resume;  // weight container to resume from
    std::filesystem::path out_dir;
};

/// Drives two-stage training; writes per-epoch checkpoints, final weights,
/// optimizer state, and history.jsonl.
void cmd_train(const TrainCmd& cmd);

struct EvalCmd {
    std::filesystem::path pred_s;
    std::optional<std::filesystem::path> pred_l;
    std::optional<std::filesystem::path> truth_s, truth_l;
    std::optional<RoiBox> roi_signal, roi_background;
    double floor_db = -60.0;
    int profile_row = -1;  // -1 disables
    std::string method_label = "method";
    std::filesystem::path out_dir;
};

/// Writes MIP images (NPY + PGM), the metric table (text + JSON), optional
/// intensity profile, and MSE against ground truth when provided.
void cmd_eval(const EvalCmd& cmd);

}  // namespace corona
