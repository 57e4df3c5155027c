// Command-line front end: simulate / solve / label / train / eval.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "corona/commands.hpp"
#include "corona/errors.hpp"

using nlohmann::json;

namespace {

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw corona::ConfigError("cannot open config file " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw corona::ConfigError("config parse error: " + std::string(e.what()));
    }
    return cfg;
}

// Config-file values override flags; unknown keys are rejected.
template <typename Fn>
void apply_config(const json& cfg, Fn&& set_key) {
    for (const auto& [key, value] : cfg.items()) {
        if (!set_key(key, value))
            throw corona::ConfigError("unknown config key '" + key + "'");
    }
}

corona::RoiBox parse_roi(const std::vector<int>& v, const char* name) {
    if (v.size() != 4) throw corona::ConfigError(std::string(name) + " needs row,col,rows,cols");
    return corona::RoiBox{v[0], v[1], v[2], v[3]};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank + sparse decomposition toolkit for ultrasound clutter suppression"};
    app.require_subcommand(1);

    // ----- simulate -----
    corona::SimulateCmd sim_cmd;
    std::string sim_config, sim_out;
    std::int64_t sim_seed = -1;
    auto* sim = app.add_subcommand("simulate", "Generate synthetic (D, L, S) datasets");
    sim->add_option("--out", sim_out, "Output directory")->required();
    sim->add_option("--seed", sim_seed, "Base RNG seed (sample i uses seed+i)")->required();
    sim->add_option("--samples", sim_cmd.samples, "Number of samples")->capture_default_str();
    sim->add_option("--frames", sim_cmd.sim.frames, "Frames per movie")->capture_default_str();
    sim->add_option("--height", sim_cmd.sim.height, "Frame height (px)")->capture_default_str();
    sim->add_option("--width", sim_cmd.sim.width, "Frame width (px)")->capture_default_str();
    sim->add_option("--pixel-pitch", sim_cmd.sim.pixel_pitch, "Pixel pitch (mm)")
        ->capture_default_str();
    sim->add_option("--concentration", sim_cmd.sim.max_mb_concentration,
                    "Max bubble concentration per cm^2")
        ->capture_default_str();
    sim->add_option("--tissue-db", sim_cmd.sim.tissue_to_mb_db,
                    "Tissue-to-bubble power ratio (dB, in [10,60])")
        ->capture_default_str();
    sim->add_option("--noise-scale", sim_cmd.sim.noise_scale,
                    "Noise amplitude relative to tissue")
        ->capture_default_str();
    std::string sim_cfg_file;
    sim->add_option("--config", sim_cfg_file, "JSON config; values override flags");

    // ----- solve -----
    corona::SolveCmd solve_cmd;
    std::string solve_out;
    std::string solve_truth_l, solve_truth_s;
    std::vector<int> solve_patch = {20, 32, 32};
    auto* solve = app.add_subcommand("solve", "Decompose or filter a movie");
    solve->add_option("--input", solve_cmd.input, "Input D movie (NPY)")->required();
    solve->add_option("--method", solve_cmd.method, "ista | fista | svd | wall")
        ->capture_default_str();
    solve->add_option("--out", solve_out, "Output directory")->required();
    solve->add_option("--lambda1", solve_cmd.solver.weights.lambda1, "Nuclear-norm weight")
        ->capture_default_str();
    solve->add_option("--lambda2", solve_cmd.solver.weights.lambda2, "Mixed-norm weight")
        ->capture_default_str();
    solve->add_option("--max-iters", solve_cmd.solver.max_iters, "Iteration cap")
        ->capture_default_str();
    solve->add_option("--rel-tol", solve_cmd.solver.rel_tol, "Relative-change stop")
        ->capture_default_str();
    double solve_lipschitz = -1.0;
    solve->add_option("--lipschitz", solve_lipschitz, "Fixed Lipschitz constant (default: auto)");
    solve->add_flag("--patchwise", solve_cmd.patchwise, "Solve per patch and recombine");
    solve->add_option("--patch-shape", solve_patch, "Patch frames,height,width")
        ->expected(3)
        ->capture_default_str();
    solve->add_option("--overlap", solve_cmd.overlap, "Patch overlap fraction")
        ->capture_default_str();
    solve->add_option("--cut-rank", solve_cmd.svd_cfg.cut_rank, "SVD filter rank threshold")
        ->capture_default_str();
    solve->add_option("--order", solve_cmd.wall_cfg.order, "Wall filter order")
        ->capture_default_str();
    solve->add_option("--cutoff", solve_cmd.wall_cfg.cutoff,
                      "Wall filter cutoff (fraction of pi)")
        ->capture_default_str();
    solve->add_option("--truth-l", solve_truth_l, "Ground-truth L (enables MSE logging)");
    solve->add_option("--truth-s", solve_truth_s, "Ground-truth S (enables MSE logging)");
    std::string solve_cfg_file;
    solve->add_option("--config", solve_cfg_file, "JSON config; values override flags");

    // ----- label -----
    corona::LabelCmd label_cmd;
    std::string label_out;
    std::vector<int> label_patch = {20, 32, 32};
    auto* label = app.add_subcommand("label", "Solver-label patches for stage-2 training");
    label->add_option("--input", label_cmd.input_manifest, "Input dataset manifest")->required();
    label->add_option("--out", label_out, "Output directory")->required();
    label->add_option("--lambda1", label_cmd.solver.weights.lambda1, "Nuclear-norm weight")
        ->capture_default_str();
    label->add_option("--lambda2", label_cmd.solver.weights.lambda2, "Mixed-norm weight")
        ->capture_default_str();
    label->add_option("--max-iters", label_cmd.solver.max_iters, "Iteration cap")
        ->capture_default_str();
    label->add_option("--patch-shape", label_patch, "Patch frames,height,width")
        ->expected(3)
        ->capture_default_str();
    label->add_option("--overlap", label_cmd.overlap, "Patch overlap fraction")
        ->capture_default_str();

    // ----- train -----
    corona::TrainCmd train_cmd;
    std::string train_out, train_stage2, train_resume;
    std::int64_t train_seed = -1;
    std::vector<int> train_patch = {20, 32, 32};
    auto* train = app.add_subcommand("train", "Train the unfolded network");
    train->add_option("--stage1", train_cmd.stage1_manifest, "Simulated dataset manifest")
        ->required();
    train->add_option("--stage2", train_stage2, "Second-stage dataset manifest");
    train->add_option("--out", train_out, "Output directory")->required();
    train->add_option("--seed", train_seed, "RNG seed")->required();
    train->add_option("--layers", train_cmd.layers, "Network depth")->capture_default_str();
    train->add_option("--init", train_cmd.init, "ista | random")->capture_default_str();
    train->add_option("--lr", train_cmd.train.learning_rate, "ADAM learning rate")
        ->capture_default_str();
    train->add_option("--epochs1", train_cmd.train.epochs_stage1, "Stage-1 epochs")
        ->capture_default_str();
    train->add_option("--epochs2", train_cmd.train.epochs_stage2, "Stage-2 epochs")
        ->capture_default_str();
    train->add_option("--batch", train_cmd.train.batch_size, "Batch size")->capture_default_str();
    train->add_option("--patch-shape", train_patch, "Patch frames,height,width")
        ->expected(3)
        ->capture_default_str();
    train->add_option("--overlap", train_cmd.train.overlap, "Patch overlap fraction")
        ->capture_default_str();
    train->add_option("--resume", train_resume, "Weight container to resume from");
    std::string train_cfg_file;
    train->add_option("--config", train_cfg_file, "JSON config; values override flags");

    // ----- eval -----
    corona::EvalCmd eval_cmd;
    std::string eval_out, eval_pred_l, eval_truth_s, eval_truth_l;
    std::vector<int> roi_signal, roi_background;
    auto* eval = app.add_subcommand("eval", "Metrics and image products");
    eval->add_option("--pred-s", eval_cmd.pred_s, "Predicted S movie")->required();
    eval->add_option("--pred-l", eval_pred_l, "Predicted L movie");
    eval->add_option("--truth-s", eval_truth_s, "Ground-truth S movie");
    eval->add_option("--truth-l", eval_truth_l, "Ground-truth L movie");
    eval->add_option("--out", eval_out, "Output directory")->required();
    eval->add_option("--roi-signal", roi_signal, "Signal ROI row,col,rows,cols")->expected(4);
    eval->add_option("--roi-background", roi_background, "Background ROI row,col,rows,cols")
        ->expected(4);
    eval->add_option("--floor-db", eval_cmd.floor_db, "dB floor for images")
        ->capture_default_str();
    eval->add_option("--profile-row", eval_cmd.profile_row, "Row for the intensity profile");
    eval->add_option("--label", eval_cmd.method_label, "Method label for the report")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            sim_cmd.out_dir = sim_out;
            sim_cmd.sim.seed = static_cast<std::uint64_t>(sim_seed);
            if (!sim_cfg_file.empty()) {
                apply_config(load_config(sim_cfg_file), [&](const std::string& k, const json& v) {
                    if (k == "samples") sim_cmd.samples = v.get<int>();
                    else if (k == "seed") sim_cmd.sim.seed = v.get<std::uint64_t>();
                    else if (k == "frames") sim_cmd.sim.frames = v.get<int>();
                    else if (k == "height") sim_cmd.sim.height = v.get<int>();
                    else if (k == "width") sim_cmd.sim.width = v.get<int>();
                    else if (k == "pixel_pitch") sim_cmd.sim.pixel_pitch = v.get<double>();
                    else if (k == "concentration")
                        sim_cmd.sim.max_mb_concentration = v.get<double>();
                    else if (k == "tissue_db") sim_cmd.sim.tissue_to_mb_db = v.get<double>();
                    else if (k == "noise_scale") sim_cmd.sim.noise_scale = v.get<double>();
                    else return false;
                    return true;
                });
            }
            cmd_simulate(sim_cmd);
        } else if (solve->parsed()) {
            solve_cmd.out_dir = solve_out;
            solve_cmd.patch_shape = {solve_patch[0], solve_patch[1], solve_patch[2]};
            if (solve_lipschitz > 0.0) solve_cmd.solver.lipschitz = solve_lipschitz;
            if (!solve_truth_l.empty()) solve_cmd.truth_l = solve_truth_l;
            if (!solve_truth_s.empty()) solve_cmd.truth_s = solve_truth_s;
            if (!solve_cfg_file.empty()) {
                apply_config(load_config(solve_cfg_file), [&](const std::string& k, const json& v) {
                    if (k == "method") solve_cmd.method = v.get<std::string>();
                    else if (k == "lambda1") solve_cmd.solver.weights.lambda1 = v.get<double>();
                    else if (k == "lambda2") solve_cmd.solver.weights.lambda2 = v.get<double>();
                    else if (k == "max_iters") solve_cmd.solver.max_iters = v.get<int>();
                    else if (k == "rel_tol") solve_cmd.solver.rel_tol = v.get<double>();
                    else if (k == "lipschitz") solve_cmd.solver.lipschitz = v.get<double>();
                    else if (k == "patchwise") solve_cmd.patchwise = v.get<bool>();
                    else if (k == "cut_rank") solve_cmd.svd_cfg.cut_rank = v.get<int>();
                    else if (k == "order") solve_cmd.wall_cfg.order = v.get<int>();
                    else if (k == "cutoff") solve_cmd.wall_cfg.cutoff = v.get<double>();
                    else if (k == "overlap") solve_cmd.overlap = v.get<double>();
                    else return false;
                    return true;
                });
            }
            cmd_solve(solve_cmd);
        } else if (label->parsed()) {
            label_cmd.out_dir = label_out;
            label_cmd.patch_shape = {label_patch[0], label_patch[1], label_patch[2]};
            cmd_label(label_cmd);
        } else if (train->parsed()) {
            train_cmd.out_dir = train_out;
            train_cmd.train.seed = static_cast<std::uint64_t>(train_seed);
            train_cmd.train.patch_shape = {train_patch[0], train_patch[1], train_patch[2]};
            if (!train_stage2.empty()) train_cmd.stage2_manifest = train_stage2;
            if (!train_resume.empty()) train_cmd.resume = train_resume;
            if (!train_cfg_file.empty()) {
                apply_config(load_config(train_cfg_file), [&](const std::string& k, const json& v) {
                    if (k == "layers") train_cmd.layers = v.get<int>();
                    else if (k == "init") train_cmd.init = v.get<std::string>();
                    else if (k == "lr") train_cmd.train.learning_rate = v.get<double>();
                    else if (k == "epochs1") train_cmd.train.epochs_stage1 = v.get<int>();
                    else if (k == "epochs2") train_cmd.train.epochs_stage2 = v.get<int>();
                    else if (k == "batch") train_cmd.train.batch_size = v.get<int>();
                    else if (k == "overlap") train_cmd.train.overlap = v.get<double>();
                    else if (k == "seed") train_cmd.train.seed = v.get<std::uint64_t>();
                    else return false;
                    return true;
                });
            }
            cmd_train(train_cmd);
        } else if (eval->parsed()) {
            eval_cmd.out_dir = eval_out;
            if (!eval_pred_l.empty()) eval_cmd.pred_l = eval_pred_l;
            if (!eval_truth_s.empty()) eval_cmd.truth_s = eval_truth_s;
            if (!eval_truth_l.empty()) eval_cmd.truth_l = eval_truth_l;
            if (!roi_signal.empty()) eval_cmd.roi_signal = parse_roi(roi_signal, "--roi-signal");
            if (!roi_background.empty())
                eval_cmd.roi_background = parse_roi(roi_background, "--roi-background");
            cmd_eval(eval_cmd);
        }
    } catch (const corona::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
