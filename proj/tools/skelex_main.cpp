// skelex - task-skeleton extraction from object-trajectory demonstrations.
//
// Subcommands: synth, segment, match, fit, eval, infer. All file formats
// are JSON with schema "skelex/1"; metric and signal dumps are CSV.
// Exit codes: 0 success, 1 input/validation error, 2 internal error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "skelex/inference.hpp"
#include "skelex/io.hpp"
#include "skelex/matcher.hpp"
#include "skelex/metrics.hpp"
#include "skelex/segmenter.hpp"
#include "skelex/skeleton.hpp"
#include "skelex/synthgen.hpp"

namespace {

using namespace skelex;
namespace fs = std::filesystem;

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("SKELEX_LOG");
        if (!env) return 1;
        const std::string v(env);
        if (v == "quiet") return 0;
        if (v == "debug") return 2;
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[skelex] " << msg << "\n";
}

struct ConfigFlags {
    std::string config_file;
    int alpha_w = -1;
    int alpha_z = -1;
    double alpha_mi = -1;
    double alpha_e = -1;
    double alpha_a = -1;
    double alpha_rest = -1;
    int obs_dim = -1;
    int smoothing = -1;
    int min_edge_duration = -1;
    double mi_significance = -1;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "config JSON file");
        app->add_option("--alpha-w", alpha_w, "MI window length");
        app->add_option("--alpha-z", alpha_z, "edge evidence count");
        app->add_option("--alpha-mi", alpha_mi, "MI trigger threshold (nats)");
        app->add_option("--alpha-e", alpha_e, "connectivity quantile");
        app->add_option("--alpha-a", alpha_a, "activation fraction");
        app->add_option("--alpha-rest", alpha_rest, "rest quantile");
        app->add_option("--obs-dim", obs_dim, "3 (positions) or 6 (full pose)");
        app->add_option("--smoothing", smoothing, "1 = cubic pre-smoothing");
        app->add_option("--min-edge-duration", min_edge_duration, "drop shorter edges");
        app->add_option("--mi-significance", mi_significance, "MI gate level, 0 disables");
    }

    // precedence: CLI flag > config file > defaults
    Config resolve() const {
        Config c;
        if (!config_file.empty()) c = config_from_json(read_json(config_file), c);
        if (alpha_w >= 0) c.window = alpha_w;
        if (alpha_z >= 0) c.min_evidence = alpha_z;
        if (alpha_mi >= 0) c.mi_threshold = alpha_mi;
        if (alpha_e >= 0) c.edge_threshold = alpha_e;
        if (alpha_a >= 0) c.activation_threshold = alpha_a;
        if (alpha_rest >= 0) c.rest_threshold = alpha_rest;
        if (obs_dim >= 0) c.obs_dim = obs_dim;
        if (smoothing >= 0) c.smoothing = smoothing != 0;
        if (min_edge_duration >= 0) c.min_edge_duration = min_edge_duration;
        if (mi_significance >= 0) c.mi_significance = mi_significance;
        c.validate();
        return c;
    }
};

TaskTemplate builtin_template(const std::string& name, std::uint64_t variant) {
    if (name == "pick_place") return pick_place_template(variant);
    if (name == "push") return push_template(variant);
    if (name == "bimanual") return bimanual_sequential_template(variant);
    if (name == "distractor") return distractor_template(variant);
    if (name == "two_reference") return two_reference_template(0.002, 0.02, variant);
    throw std::invalid_argument("unknown builtin template: " + name);
}

std::vector<Demonstration> load_demos(const std::vector<std::string>& paths) {
    if (paths.empty()) throw std::invalid_argument("no demonstration files given");
    std::vector<Demonstration> demos;
    demos.reserve(paths.size());
    for (const auto& p : paths) demos.push_back(demo_from_json(read_json(p)));
    return demos;
}

int run_synth(const std::string& template_path, const std::string& builtin,
              std::uint64_t variant, int n_demos, std::uint64_t seed, const std::string& out_dir,
              double noise_pos, double noise_rot) {
    TaskTemplate tmpl = template_path.empty() ? builtin_template(builtin, variant)
                                              : template_from_json(read_json(template_path));
    if (noise_pos >= 0) tmpl.noise_pos = noise_pos;
    if (noise_rot >= 0) tmpl.noise_rot = noise_rot;
    const SynthResult r = generate(tmpl, n_demos, seed);
    const fs::path dir(out_dir);
    for (int d = 0; d < n_demos; ++d) {
        char name[32];
        std::snprintf(name, sizeof(name), "demo_%03d.json", d);
        write_json(dir / name, demo_to_json(r.demos[d]));
    }
    write_json(dir / "labels.json", labels_to_json(r.truth));
    write_json(dir / "template.json", template_to_json(tmpl));
    log_info("wrote " + std::to_string(n_demos) + " demos to " + dir.string());
    return 0;
}

int run_segment(const std::string& demo_path, const std::string& out_path,
                const std::string& signals_csv, const ConfigFlags& flags) {
    const Config cfg = flags.resolve();
    const Demonstration demo = demo_from_json(read_json(demo_path));
    const SegmentationResult seg = segment(demo, cfg);
    write_json(out_path, events_to_json(seg.events));
    if (!signals_csv.empty()) {
        const MiSignals signals = mi_signals(cfg.smoothing
                                                 ? smooth_trajectories(demo, cfg.smoothing_window)
                                                 : demo,
                                             cfg);
        std::ofstream csv(signals_csv);
        if (!csv) throw std::runtime_error("cannot open for writing: " + signals_csv);
        csv << "t,pair,mi\n";
        for (std::size_t p = 0; p < signals.pairs.size(); ++p) {
            for (std::size_t t = 0; t < signals.series[p].size(); ++t) {
                csv << t << "," << signals.pairs[p].first << "-" << signals.pairs[p].second
                    << "," << signals.series[p][t] << "\n";
            }
        }
    }
    log_info("wrote events to " + out_path);
    return 0;
}

int run_match(const std::vector<std::string>& demo_paths, const std::string& out_path,
              bool exhaustive) {
    const auto demos = load_demos(demo_paths);
    std::vector<DemoFeatures> features;
    for (const auto& d : demos) features.push_back(features_of(d));
    Assignment a = exhaustive ? solve_exhaustive(features) : solve_heuristic(features);
    a.score = score_assignment(a, features);
    write_json(out_path, assignment_to_json(a, features));
    log_info("matched " + std::to_string(a.tuples.size()) + " identities");
    return 0;
}

int run_fit(const std::vector<std::string>& demo_paths, const std::string& out_path,
            bool minimize, const ConfigFlags& flags, std::uint64_t seed,
            const std::string& sweep_csv, const std::vector<std::string>& eval_paths,
            const std::string& labels_path, const std::string& task_name) {
    const Config cfg = flags.resolve();
    const auto demos = load_demos(demo_paths);
    if (demos.size() < 2) throw std::invalid_argument("fit needs at least two demonstrations");

    TaskSkeleton skeleton = fit_skeleton(demos, cfg, seed);
    if (minimize) skeleton = minimize_references(skeleton);
    write_json(out_path, skeleton_to_json(skeleton));
    log_info("fitted skeleton with " + std::to_string(skeleton.steps.size()) + " steps");

    if (!sweep_csv.empty()) {
        std::vector<Demonstration> eval_demos = eval_paths.empty()
                                                    ? std::vector<Demonstration>{}
                                                    : load_demos(eval_paths);
        GroundTruth truth;
        const bool have_labels = !labels_path.empty();
        if (have_labels) truth = labels_from_json(read_json(labels_path));

        std::ofstream csv(sweep_csv);
        if (!csv) throw std::runtime_error("cannot open for writing: " + sweep_csv);
        csv << "task,n_train,sa,sd,eds,loglik\n";
        for (std::size_t k = 2; k <= demos.size(); ++k) {
            std::vector<Demonstration> train(demos.begin(), demos.begin() + k);
            TaskSkeleton s = fit_skeleton(train, cfg, seed);
            if (minimize) s = minimize_references(s);
            csv << task_name << "," << k << ",";
            if (have_labels) {
                const SkeletonReport rep = structural_accuracy(s, truth.skeleton, minimize);
                csv << rep.sa << "," << rep.sd_steps;
            } else {
                csv << ",";
            }
            csv << ",";  // eds column reserved for segment-level sweeps
            if (!eval_demos.empty()) {
                double acc = 0.0;
                for (const auto& d : eval_demos) acc += evaluate_likelihood(s, d);
                csv << "," << acc / static_cast<double>(eval_demos.size()) << "\n";
            } else {
                csv << ",\n";
            }
        }
        log_info("wrote sweep to " + sweep_csv);
    }
    return 0;
}

int run_eval(const std::string& events_path, const std::string& labels_path, int demo_index,
             const std::string& model_path, bool minimized,
             const std::vector<std::string>& demo_paths, const std::string& out_path,
             const std::string& csv_path, const std::string& task_name, int n_train) {
    ordered_json out;
    out["schema"] = kSchemaVersion;
    GroundTruth truth;
    if (!labels_path.empty()) truth = labels_from_json(read_json(labels_path));

    bool have_eds = false, have_sa = false, have_ll = false;
    SegReport seg_rep;
    SkeletonReport skel_rep;
    double loglik = 0.0;

    if (!events_path.empty()) {
        if (labels_path.empty()) throw std::invalid_argument("--events requires --labels");
        const auto events = events_from_json(read_json(events_path));
        if (demo_index < 0 || demo_index >= static_cast<int>(truth.events.size())) {
            throw std::invalid_argument("--demo-index out of range");
        }
        seg_rep = segmentation_report(events, truth.events[demo_index]);
        out["eds"] = seg_rep.eds;
        out["sd"] = seg_rep.sd;
        have_eds = true;
    }

    TaskSkeleton skeleton;
    if (!model_path.empty()) {
        skeleton = skeleton_from_json(read_json(model_path));
        if (!labels_path.empty()) {
            skel_rep = structural_accuracy(skeleton, truth.skeleton, minimized);
            out["sa"] = skel_rep.sa;
            out["sd_steps"] = skel_rep.sd_steps;
            have_sa = true;
        }
        if (!demo_paths.empty()) {
            const auto demos = load_demos(demo_paths);
            double acc = 0.0;
            for (const auto& d : demos) acc += evaluate_likelihood(skeleton, d);
            loglik = acc / static_cast<double>(demos.size());
            out["loglik"] = loglik;
            have_ll = true;
        }
    }
    if (!have_eds && !have_sa && !have_ll) {
        throw std::invalid_argument("eval needs --events and/or --model inputs");
    }

    if (!out_path.empty()) write_json(out_path, out);
    else std::cout << out.dump(2) << "\n";

    if (!csv_path.empty()) {
        const bool fresh = !fs::exists(csv_path);
        std::ofstream csv(csv_path, std::ios::app);
        if (!csv) throw std::runtime_error("cannot open for writing: " + csv_path);
        if (fresh) csv << "task,n_train,sa,sd,eds,loglik\n";
        csv << task_name << "," << n_train << ",";
        if (have_sa) csv << skel_rep.sa;
        csv << ",";
        if (have_sa) csv << skel_rep.sd_steps;
        else if (have_eds) csv << seg_rep.sd;
        csv << ",";
        if (have_eds) csv << seg_rep.eds;
        csv << ",";
        if (have_ll) csv << loglik;
        csv << "\n";
    }
    return 0;
}

int run_infer(const std::string& model_path, const std::string& scene_path,
              const std::string& out_path) {
    const TaskSkeleton skeleton = skeleton_from_json(read_json(model_path));
    const Scene scene = scene_from_json(read_json(scene_path));
    const auto actions = plan(skeleton, scene);
    write_json(out_path, plan_to_json(actions));
    log_info("planned " + std::to_string(actions.size()) + " actions");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse task-skeleton extraction from demonstrations"};
    app.require_subcommand(1);

    int jobs = 0;
    app.add_option("--jobs", jobs, "worker threads (0 = hardware default)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate synthetic demonstrations with labels");
    std::string synth_template, synth_builtin = "pick_place", synth_out = ".";
    std::uint64_t synth_variant = 0, synth_seed = 0;
    int synth_n = 4;
    double synth_noise_pos = -1, synth_noise_rot = -1;
    synth->add_option("--template", synth_template, "template JSON");
    synth->add_option("--builtin", synth_builtin,
                      "pick_place|push|bimanual|distractor|two_reference");
    synth->add_option("--variant", synth_variant, "layout variant");
    synth->add_option("--demos", synth_n, "number of demonstrations");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--noise-pos", synth_noise_pos, "position noise stddev (m)");
    synth->add_option("--noise-rot", synth_noise_rot, "rotation noise stddev (rad)");
    synth->add_option("--out", synth_out, "output directory");

    // segment
    auto* seg = app.add_subcommand("segment", "segment one demonstration into events");
    std::string seg_demo, seg_out = "events.json", seg_csv;
    ConfigFlags seg_flags;
    seg->add_option("--demo", seg_demo, "demonstration JSON")->required();
    seg->add_option("--out", seg_out, "events output JSON");
    seg->add_option("--signals-csv", seg_csv, "per-pair MI dump (t,pair,mi)");
    seg_flags.attach(seg);

    // match
    auto* match = app.add_subcommand("match", "match objects across demonstrations");
    std::vector<std::string> match_demos;
    std::string match_out = "match.json";
    bool match_exhaustive = false;
    match->add_option("demos", match_demos, "demonstration JSON files")->required();
    match->add_option("--out", match_out, "assignment output JSON");
    match->add_flag("--exhaustive", match_exhaustive, "use the exhaustive solver");

    // fit
    auto* fit = app.add_subcommand("fit", "fit a task skeleton from demonstrations");
    std::vector<std::string> fit_demos, fit_eval;
    std::string fit_out = "model.json", fit_sweep, fit_labels, fit_task = "task";
    bool fit_minimize = false;
    std::uint64_t fit_seed = 0;
    ConfigFlags fit_flags;
    fit->add_option("demos", fit_demos, "demonstration JSON files")->required();
    fit->add_option("--out", fit_out, "model output JSON");
    fit->add_flag("--minimize", fit_minimize, "reduce world references to one object");
    fit->add_option("--seed", fit_seed, "seed recorded in provenance");
    fit->add_option("--sweep", fit_sweep, "CSV of metrics for 2..N training demos");
    fit->add_option("--eval-demo", fit_eval, "held-out demos for the sweep likelihood");
    fit->add_option("--labels", fit_labels, "labels JSON for sweep structural accuracy");
    fit->add_option("--task", fit_task, "task name used in CSV rows");
    fit_flags.attach(fit);

    // eval
    auto* eval = app.add_subcommand("eval", "compute metrics against labels");
    std::string eval_events, eval_labels, eval_model, eval_out, eval_csv, eval_task = "task";
    std::vector<std::string> eval_demos;
    bool eval_minimized = false;
    int eval_demo_index = 0, eval_n_train = 0;
    eval->add_option("--events", eval_events, "generated events JSON");
    eval->add_option("--labels", eval_labels, "labels JSON");
    eval->add_option("--demo-index", eval_demo_index, "label demo index for --events");
    eval->add_option("--model", eval_model, "fitted model JSON");
    eval->add_flag("--minimized", eval_minimized, "exact-reference structural accuracy");
    eval->add_option("--demo", eval_demos, "demos for held-out likelihood");
    eval->add_option("--out", eval_out, "metrics output JSON (stdout if omitted)");
    eval->add_option("--csv", eval_csv, "append a task,n_train,sa,sd,eds,loglik row");
    eval->add_option("--task", eval_task, "task name for the CSV row");
    eval->add_option("--n-train", eval_n_train, "training set size for the CSV row");

    // infer
    auto* infer = app.add_subcommand("infer", "plan magic actions for a scene");
    std::string infer_model, infer_scene, infer_out = "plan.json";
    infer->add_option("--model", infer_model, "fitted model JSON")->required();
    infer->add_option("--scene", infer_scene, "scene JSON")->required();
    infer->add_option("--out", infer_out, "plan output JSON");

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#endif

    try {
        if (synth->parsed()) {
            return run_synth(synth_template, synth_builtin, synth_variant, synth_n, synth_seed,
                             synth_out, synth_noise_pos, synth_noise_rot);
        }
        if (seg->parsed()) return run_segment(seg_demo, seg_out, seg_csv, seg_flags);
        if (match->parsed()) return run_match(match_demos, match_out, match_exhaustive);
        if (fit->parsed()) {
            return run_fit(fit_demos, fit_out, fit_minimize, fit_flags, fit_seed, fit_sweep,
                           fit_eval, fit_labels, fit_task);
        }
        if (eval->parsed()) {
            return run_eval(eval_events, eval_labels, eval_demo_index, eval_model,
                            eval_minimized, eval_demos, eval_out, eval_csv, eval_task,
                            eval_n_train);
        }
        if (infer->parsed()) return run_infer(infer_model, infer_scene, infer_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
