#include "corona/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "corona/autodiff.hpp"
#include "corona/errors.hpp"
#include "corona/network.hpp"
#include "corona/npy.hpp"

namespace corona {

using nlohmann::json;

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_pgm(const Eigen::MatrixXd& db_image, double floor_db,
               const std::filesystem::path& path) {
    if (floor_db >= 0.0) throw ConfigError("write_pgm: floor_db must be negative");
    std::ostringstream out;
    out << "P5\n" << db_image.cols() << " " << db_image.rows() << "\n255\n";
    for (long i = 0; i < db_image.rows(); ++i)
        for (long j = 0; j < db_image.cols(); ++j) {
            const double t = (db_image(i, j) - floor_db) / (0.0 - floor_db);
            const int v = static_cast<int>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
            out.put(static_cast<char>(v));
        }
    write_text_atomic(path, out.str());
}

// --------------------------------------------------------------------------
// Manifest I/O
// --------------------------------------------------------------------------

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json root;
    root["version"] = 1;
    root["samples"] = json::array();
    for (const ManifestEntry& e : manifest.samples) {
        root["samples"].push_back({{"d", e.d},
                                   {"l", e.l},
                                   {"s", e.s},
                                   {"seed", e.seed},
                                   {"frames", e.frames},
                                   {"height", e.height},
                                   {"width", e.width},
                                   {"provenance", e.provenance}});
    }
    write_text_atomic(path, root.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("manifest: cannot open " + path.string());
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw IoError("manifest: parse error in " + path.string() + ": " + e.what());
    }
    if (!root.contains("samples") || !root["samples"].is_array())
        throw IoError("manifest: missing samples array in " + path.string());

    const std::filesystem::path base = path.parent_path();
    DatasetManifest manifest;
    for (const json& j : root["samples"]) {
        ManifestEntry e;
        e.d = j.at("d").get<std::string>();
        e.l = j.at("l").get<std::string>();
        e.s = j.at("s").get<std::string>();
        e.seed = j.value("seed", std::uint64_t{0});
        e.frames = j.at("frames").get<int>();
        e.height = j.at("height").get<int>();
        e.width = j.at("width").get<int>();
        e.provenance = j.value("provenance", "simulated");
        for (const std::string& rel : {e.d, e.l, e.s}) {
            const std::filesystem::path file = base / rel;
            if (!std::filesystem::exists(file))
                throw IoError("manifest: missing file " + file.string());
        }
        manifest.samples.push_back(std::move(e));
    }
    return manifest;
}

namespace {

MovieTensor load_checked(const std::filesystem::path& base, const std::string& rel,
                         const ManifestEntry& e) {
    MovieTensor m = read_movie(base / rel);
    if (m.frames() != e.frames || m.height() != e.height || m.width() != e.width)
        throw IoError("manifest: shape mismatch for " + rel);
    return m;
}

json sim_config_json(const sim::SimConfig& c) {
    return json{{"height", c.height},
                {"width", c.width},
                {"pixel_pitch_mm", c.pixel_pitch},
                {"frames", c.frames},
                {"dt_s", c.dt},
                {"max_mb_concentration_per_cm2", c.max_mb_concentration},
                {"v_det_mm_per_frame", c.v_det},
                // 0.05 * 0.12 / dt^2 mm/s^2, expressed per frame^2
                {"accel_std_mm_per_frame2", c.accel_std},
                {"turn_range_deg", c.turn_range_deg},
                {"amp_jitter", {c.amp_jitter_lo, c.amp_jitter_hi}},
                {"tissue_gaussians", c.tissue_gaussians},
                {"tissue_lpf_size_px", c.tissue_lpf_size},
                {"tissue_lpf_sigma_px", c.tissue_lpf_sigma},
                {"phase_mean_range_deg", {c.phase_mean_lo_deg, c.phase_mean_hi_deg}},
                {"phase_std_deg", c.phase_std_deg},
                {"flow_kernel_size", c.flow_kernel_size},
                {"flow_kernel_count", c.flow_kernel_count},
                {"flow_perturb_std", c.flow_perturb_std},
                {"flow_floor", c.flow_floor},
                {"psf_std_lateral_mm", c.psf_std_lateral},
                {"psf_std_axial_mm", c.psf_std_axial},
                {"noise_scale", c.noise_scale},
                {"tissue_to_mb_db", c.tissue_to_mb_db},
                {"seed", c.seed}};
}

std::string sample_name(int index, const char* role) {
    std::ostringstream s;
    s << "sample_" << std::setw(4) << std::setfill('0') << index << "_" << role << ".npy";
    return s.str();
}

}  // namespace

std::filesystem::path cmd_simulate(const SimulateCmd& cmd) {
    if (cmd.samples < 1) throw ConfigError("simulate: samples must be >= 1");
    std::filesystem::create_directories(cmd.out_dir);

    DatasetManifest manifest;
    for (int i = 0; i < cmd.samples; ++i) {
        sim::SimConfig cfg = cmd.sim;
        cfg.seed = cmd.sim.seed + static_cast<std::uint64_t>(i);
        const sim::SimSample sample = sim::simulate(cfg);

        ManifestEntry e;
        e.d = sample_name(i, "D");
        e.l = sample_name(i, "L");
        e.s = sample_name(i, "S");
        e.seed = cfg.seed;
        e.frames = cfg.frames;
        e.height = cfg.height;
        e.width = cfg.width;
        write_movie(sample.D, cmd.out_dir / e.d);
        write_movie(sample.L, cmd.out_dir / e.l);
        write_movie(sample.S, cmd.out_dir / e.s);
        manifest.samples.push_back(std::move(e));
    }

    json echo;
    echo["command"] = "simulate";
    echo["samples"] = cmd.samples;
    echo["sim"] = sim_config_json(cmd.sim);
    write_text_atomic(cmd.out_dir / "config_echo.json", echo.dump(2) + "\n");

    const std::filesystem::path manifest_path = cmd.out_dir / "manifest.json";
    write_manifest(manifest, manifest_path);
    return manifest_path;
}

namespace {

json solver_config_json(const SolverConfig& cfg) {
    json j{{"lambda1", cfg.weights.lambda1},
           {"lambda2", cfg.weights.lambda2},
           {"max_iters", cfg.max_iters},
           {"rel_tol", cfg.rel_tol},
           {"variant", cfg.variant == SolverVariant::Fista ? "fista" : "ista"}};
    if (cfg.lipschitz) j["lipschitz"] = *cfg.lipschitz;
    return j;
}

double movie_mse(const MovieTensor& a, const MovieTensor& b) {
    return (a - b).squared_norm() / static_cast<double>(a.size());
}

}  // namespace

void cmd_solve(const SolveCmd& cmd) {
    std::filesystem::create_directories(cmd.out_dir);
    const MovieTensor d = read_movie(cmd.input);

    std::optional<MovieTensor> truth_l, truth_s;
    if (cmd.truth_l) truth_l = read_movie(*cmd.truth_l);
    if (cmd.truth_s) truth_s = read_movie(*cmd.truth_s);

    std::ostringstream log;
    json echo;
    echo["command"] = "solve";
    echo["input"] = cmd.input.string();
    echo["method"] = cmd.method;

    if (cmd.method == "svd") {
        echo["cut_rank"] = cmd.svd_cfg.cut_rank;
        const MovieTensor filtered = svd_filter(d, cmd.svd_cfg);
        write_movie(filtered, cmd.out_dir / "filtered.npy");
        log << json{{"event", "done"}, {"method", "svd"}, {"cut_rank", cmd.svd_cfg.cut_rank}}
            << "\n";
    } else if (cmd.method == "wall") {
        echo["order"] = cmd.wall_cfg.order;
        echo["cutoff"] = cmd.wall_cfg.cutoff;
        const MovieTensor filtered = wall_filter(d, cmd.wall_cfg);
        write_movie(filtered, cmd.out_dir / "filtered.npy");
        log << json{{"event", "done"}, {"method", "wall"}, {"cutoff", cmd.wall_cfg.cutoff}}
            << "\n";
    } else if (cmd.method == "ista" || cmd.method == "fista") {
        SolverConfig cfg = cmd.solver;
        cfg.variant = (cmd.method == "ista") ? SolverVariant::Ista : SolverVariant::Fista;
        echo["solver"] = solver_config_json(cfg);
        echo["patchwise"] = cmd.patchwise;

        MovieTensor l_out(d.frames(), d.height(), d.width());
        MovieTensor s_out(d.frames(), d.height(), d.width());

        if (cmd.patchwise) {
            const auto d_patches = extract_patches(d, cmd.patch_shape, cmd.overlap);
            std::vector<Patch> l_patches, s_patches;
            l_patches.reserve(d_patches.size());
            s_patches.reserve(d_patches.size());
            for (std::size_t i = 0; i < d_patches.size(); ++i) {
                const Patch& p = d_patches[i];
                const SolveResult res =
                    solve(unfold(p.data), MeasurementOps::identity(), cfg);
                l_patches.push_back(
                    {fold(res.L, p.data.frames(), p.data.height(), p.data.width()), p.origin});
                s_patches.push_back(
                    {fold(res.S, p.data.frames(), p.data.height(), p.data.width()), p.origin});
                log << json{{"event", "patch"},
                            {"index", i},
                            {"iters", res.state.iter},
                            {"objective", res.state.objective_history.back()}}
                    << "\n";
            }
            l_out = recombine_patches(l_patches, d.frames(), d.height(), d.width());
            s_out = recombine_patches(s_patches, d.frames(), d.height(), d.width());
        } else {
            IterateObserver observer;
            if (truth_l && truth_s) {
                observer = [&](int iter, const CasoratiMatrix& lm, const CasoratiMatrix& sm) {
                    const MovieTensor lt = fold(lm, d.frames(), d.height(), d.width());
                    const MovieTensor st = fold(sm, d.frames(), d.height(), d.width());
                    log << json{{"event", "iterate"},
                                {"iter", iter},
                                {"mse_l", movie_mse(lt, *truth_l)},
                                {"mse_s", movie_mse(st, *truth_s)}}
                        << "\n";
                };
            }
            const SolveResult res = solve(unfold(d), MeasurementOps::identity(), cfg, observer);
            l_out = fold(res.L, d.frames(), d.height(), d.width());
            s_out = fold(res.S, d.frames(), d.height(), d.width());
            for (std::size_t k = 0; k < res.state.objective_history.size(); ++k)
                log << json{{"event", "objective"},
                            {"iter", k + 1},
                            {"value", res.state.objective_history[k]}}
                    << "\n";
            log << json{{"event", "done"},
                        {"iters", res.state.iter},
                        {"converged", res.state.converged},
                        {"lipschitz", res.state.lipschitz}}
                << "\n";
        }
        write_movie(l_out, cmd.out_dir / "L.npy");
        write_movie(s_out, cmd.out_dir / "S.npy");
        if (truth_s) {
            const double mse_s = movie_mse(s_out, *truth_s);
            log << json{{"event", "mse"}, {"mse_s", mse_s}} << "\n";
        }
    } else {
        throw ConfigError("solve: unknown method '" + cmd.method + "'");
    }

    write_text_atomic(cmd.out_dir / "solve_log.jsonl", log.str());
    write_text_atomic(cmd.out_dir / "config_echo.json", echo.dump(2) + "\n");
}

std::filesystem::path cmd_label(const LabelCmd& cmd) {
    std::filesystem::create_directories(cmd.out_dir);
    const DatasetManifest input = read_manifest(cmd.input_manifest);
    const std::filesystem::path base = cmd.input_manifest.parent_path();

    DatasetManifest out_manifest;
    std::ostringstream log;
    int index = 0;
    for (const ManifestEntry& e : input.samples) {
        const MovieTensor d = load_checked(base, e.d, e);
        std::vector<MovieTensor> d_patches;
        for (Patch& p : extract_patches(d, cmd.patch_shape, cmd.overlap))
            d_patches.push_back(std::move(p.data));

        const LabelReport report = label_with_solver(d_patches, cmd.solver);
        for (const std::string& msg : report.messages)
            log << json{{"event", "skipped"}, {"detail", msg}} << "\n";

        for (const TrainPair& pair : report.pairs) {
            ManifestEntry pe;
            pe.d = sample_name(index, "D");
            pe.l = sample_name(index, "L");
            pe.s = sample_name(index, "S");
            pe.seed = e.seed;
            pe.frames = pair.d.frames();
            pe.height = pair.d.height();
            pe.width = pair.d.width();
            pe.provenance = "solver-labeled";
            write_movie(pair.d, cmd.out_dir / pe.d);
            write_movie(pair.l_target, cmd.out_dir / pe.l);
            write_movie(pair.s_target, cmd.out_dir / pe.s);
            out_manifest.samples.push_back(std::move(pe));
            ++index;
        }
    }

    json echo;
    echo["command"] = "label";
    echo["input"] = cmd.input_manifest.string();
    echo["solver"] = solver_config_json(cmd.solver);
    echo["patch_shape"] = {cmd.patch_shape.frames, cmd.patch_shape.height, cmd.patch_shape.width};
    echo["overlap"] = cmd.overlap;
    write_text_atomic(cmd.out_dir / "config_echo.json", echo.dump(2) + "\n");
    write_text_atomic(cmd.out_dir / "label_log.jsonl", log.str());

    const std::filesystem::path manifest_path = cmd.out_dir / "manifest.json";
    write_manifest(out_manifest, manifest_path);
    return manifest_path;
}

namespace {

std::vector<TrainPair> pairs_from_manifest(const std::filesystem::path& manifest_path,
                                           const PatchShape& shape, double overlap) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    const std::filesystem::path base = manifest_path.parent_path();
    std::vector<TrainPair> pairs;
    for (const ManifestEntry& e : manifest.samples) {
        const MovieTensor d = load_checked(base, e.d, e);
        const MovieTensor l = load_checked(base, e.l, e);
        const MovieTensor s = load_checked(base, e.s, e);
        const Provenance prov = (e.provenance == "solver-labeled") ? Provenance::SolverLabeled
                                                                   : Provenance::Simulated;
        if (d.frames() == shape.frames && d.height() == shape.height &&
            d.width() == shape.width) {
            pairs.push_back(TrainPair{d, s, l, prov});  // already patch-sized
            continue;
        }
        auto dp = extract_patches(d, shape, overlap);
        auto lp = extract_patches(l, shape, overlap);
        auto sp = extract_patches(s, shape, overlap);
        for (std::size_t i = 0; i < dp.size(); ++i)
            pairs.push_back(TrainPair{std::move(dp[i].data), std::move(sp[i].data),
                                      std::move(lp[i].data), prov});
    }
    return pairs;
}

constexpr std::uint32_t kAdamMagic = 0x43524e41;  // 'CRNA'

void save_adam(const AdamState& st, const std::filesystem::path& path) {
    std::string buf;
    auto put_u32 = [&buf](std::uint32_t v) { buf.append(reinterpret_cast<const char*>(&v), 4); };
    auto put_f64 = [&buf](double v) { buf.append(reinterpret_cast<const char*>(&v), 8); };
    put_u32(kAdamMagic);
    put_u32(1);
    put_u32(static_cast<std::uint32_t>(st.m.size()));
    put_f64(static_cast<double>(st.step));
    put_f64(st.beta1);
    put_f64(st.beta2);
    put_f64(st.epsilon);
    for (double v : st.m) put_f64(v);
    for (double v : st.v) put_f64(v);
    write_text_atomic(path, buf);
}

AdamState load_adam(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("adam state: cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t off = 0;
    auto take_u32 = [&buf, &off]() {
        if (off + 4 > buf.size()) throw IoError("adam state: truncated");
        std::uint32_t v;
        std::memcpy(&v, buf.data() + off, 4);
        off += 4;
        return v;
    };
    auto take_f64 = [&buf, &off]() {
        if (off + 8 > buf.size()) throw IoError("adam state: truncated");
        double v;
        std::memcpy(&v, buf.data() + off, 8);
        off += 8;
        return v;
    };
    if (take_u32() != kAdamMagic) throw IoError("adam state: bad magic");
    if (take_u32() != 1) throw IoError("adam state: unsupported version");
    const std::uint32_t dim = take_u32();
    AdamState st = AdamState::init(dim);
    st.step = static_cast<long>(take_f64());
    st.beta1 = take_f64();
    st.beta2 = take_f64();
    st.epsilon = take_f64();
    for (std::uint32_t i = 0; i < dim; ++i) st.m[i] = take_f64();
    for (std::uint32_t i = 0; i < dim; ++i) st.v[i] = take_f64();
    if (off != buf.size()) throw IoError("adam state: trailing bytes");
    return st;
}

}  // namespace

void cmd_train(const TrainCmd& cmd) {
    cmd.train.validate();
    if (cmd.layers < 1) throw ConfigError("train: layers must be >= 1");
    std::filesystem::create_directories(cmd.out_dir);

    const std::vector<TrainPair> stage1 =
        pairs_from_manifest(cmd.stage1_manifest, cmd.train.patch_shape, cmd.train.overlap);
    std::vector<TrainPair> stage2;
    TrainConfig train_cfg = cmd.train;
    if (cmd.stage2_manifest)
        stage2 = pairs_from_manifest(*cmd.stage2_manifest, cmd.train.patch_shape,
                                     cmd.train.overlap);
    else
        train_cfg.epochs_stage2 = 0;  // second stage needs its own dataset

    std::mt19937_64 rng(cmd.train.seed);
    CoronaNetwork net;
    std::optional<AdamState> resume_state;
    if (cmd.resume) {
        net = load_weights(*cmd.resume);
        const std::filesystem::path adam_path = cmd.resume->string() + ".adam";
        if (std::filesystem::exists(adam_path)) resume_state = load_adam(adam_path);
    } else if (cmd.init == "ista") {
        net = init_default(cmd.layers, 2.0, rng);
    } else if (cmd.init == "random") {
        net = init_random(cmd.layers, 0.1, rng);
    } else {
        throw ConfigError("train: unknown init '" + cmd.init + "'");
    }

    std::ostringstream history;
    EpochCallback callback = [&](const EpochRecord& rec, const CoronaNetwork& current) {
        history << json{{"epoch", rec.epoch},
                        {"stage", rec.stage},
                        {"train_loss", rec.train_loss},
                        {"val_loss", rec.val_loss},
                        {"lambda_l", rec.lambda_l},
                        {"lambda_s", rec.lambda_s},
                        {"seconds", rec.seconds}}
                << "\n";
        std::ostringstream name;
        name << "weights_epoch_" << std::setw(3) << std::setfill('0') << rec.epoch << ".bin";
        save_weights(current, cmd.out_dir / name.str());
    };

    const TrainResult result = train(std::move(net), stage1, stage2, train_cfg, callback,
                                     std::move(resume_state));

    save_weights(result.net, cmd.out_dir / "weights.bin");
    save_adam(result.adam, cmd.out_dir / "weights.bin.adam");
    write_text_atomic(cmd.out_dir / "history.jsonl", history.str());

    json echo;
    echo["command"] = "train";
    echo["stage1"] = cmd.stage1_manifest.string();
    if (cmd.stage2_manifest) echo["stage2"] = cmd.stage2_manifest->string();
    echo["layers"] = cmd.layers;
    echo["init"] = cmd.init;
    echo["learning_rate"] = cmd.train.learning_rate;
    echo["epochs_stage1"] = cmd.train.epochs_stage1;
    echo["epochs_stage2"] = cmd.train.epochs_stage2;
    echo["batch_size"] = cmd.train.batch_size;
    echo["patch_shape"] = {cmd.train.patch_shape.frames, cmd.train.patch_shape.height,
                           cmd.train.patch_shape.width};
    echo["overlap"] = cmd.train.overlap;
    echo["seed"] = cmd.train.seed;
    echo["loss_weights"] = {cmd.train.loss_weight_s, cmd.train.loss_weight_l};
    echo["aborted_non_finite"] = result.aborted_non_finite;
    write_text_atomic(cmd.out_dir / "config_echo.json", echo.dump(2) + "\n");
}

void cmd_eval(const EvalCmd& cmd) {
    std::filesystem::create_directories(cmd.out_dir);
    const MovieTensor pred_s = read_movie(cmd.pred_s);

    const Eigen::MatrixXd mip_s = mip(pred_s);
    const Eigen::MatrixXd db_s = to_db(mip_s, cmd.floor_db);
    write_matrix(mip_s, cmd.out_dir / "mip_s.npy");
    write_matrix(db_s, cmd.out_dir / "mip_s_db.npy");
    write_pgm(db_s, cmd.floor_db, cmd.out_dir / "mip_s.pgm");

    json report;
    report["method"] = cmd.method_label;
    report["floor_db"] = cmd.floor_db;
    std::ostringstream text;
    text << "method: " << cmd.method_label << "\n";

    if (cmd.pred_l) {
        const MovieTensor pred_l = read_movie(*cmd.pred_l);
        const Eigen::MatrixXd mip_l = mip(pred_l);
        write_matrix(mip_l, cmd.out_dir / "mip_l.npy");
        write_pgm(to_db(mip_l, cmd.floor_db), cmd.floor_db, cmd.out_dir / "mip_l.pgm");
        if (cmd.truth_l) {
            const double v = movie_mse(pred_l, read_movie(*cmd.truth_l));
            report["mse_l"] = v;
            text << "mse_l: " << v << "\n";
        }
    }
    if (cmd.truth_s) {
        const double v = movie_mse(pred_s, read_movie(*cmd.truth_s));
        report["mse_s"] = v;
        text << "mse_s: " << v << "\n";
    }

    if (cmd.roi_signal && cmd.roi_background) {
        const auto cnr = cnr_db(mip_s, *cmd.roi_signal, *cmd.roi_background);
        const auto cr = cr_db(mip_s, *cmd.roi_signal, *cmd.roi_background);
        report["cnr_db"] = cnr ? json(*cnr) : json(nullptr);
        report["cr_db"] = cr ? json(*cr) : json(nullptr);
        text << "cnr_db: " << (cnr ? std::to_string(*cnr) : "undefined") << "\n";
        text << "cr_db: " << (cr ? std::to_string(*cr) : "undefined") << "\n";
    } else if (cmd.roi_signal || cmd.roi_background) {
        throw ConfigError("eval: both signal and background ROIs are required");
    }

    if (cmd.profile_row >= 0) {
        const std::vector<double> profile = intensity_profile(mip_s, cmd.profile_row);
        json jp = json::array();
        for (double v : profile)
            jp.push_back(std::isinf(v) ? json(nullptr) : json(v));  // null marks -inf gaps
        report["profile_row"] = cmd.profile_row;
        report["profile_db"] = jp;
    }

    write_text_atomic(cmd.out_dir / "report.json", report.dump(2) + "\n");
    write_text_atomic(cmd.out_dir / "report.txt", text.str());
}

}  // namespace corona
