// spamlens: train and evaluate the image-spam CNN, generate the synthetic
// corpus, and explain individual predictions (LIME, Kernel SHAP, occlusion).
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Every output file
// is written atomically, so a failed run never leaves partial artifacts.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spamlens/checkpoint.hpp"
#include "spamlens/dataset.hpp"
#include "spamlens/image_io.hpp"
#include "spamlens/jsonio.hpp"
#include "spamlens/lime.hpp"
#include "spamlens/metrics.hpp"
#include "spamlens/model.hpp"
#include "spamlens/occlusion.hpp"
#include "spamlens/overlay.hpp"
#include "spamlens/runtime.hpp"
#include "spamlens/shap.hpp"

namespace fs = std::filesystem;
using namespace spamlens;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config file: flat `key = value` lines, `#` comments, later lines win.
// Flags always override file values; file values override built-in defaults.

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> parse_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        const std::string key = eq == std::string::npos ? "" : trim(t.substr(0, eq));
        if (key.empty())
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        kv[key] = trim(t.substr(eq + 1));
    }
    return kv;
}

void parse_into(const std::string& key, const std::string& v, bool& out) {
    if (v == "true" || v == "1" || v == "yes")
        out = true;
    else if (v == "false" || v == "0" || v == "no")
        out = false;
    else
        throw UsageError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T>
void parse_into(const std::string& key, const std::string& v, T& out) {
    T parsed{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, parsed);
    if (ec != std::errc{} || ptr != end)
        throw UsageError("config key '" + key + "': cannot parse '" + v + "'");
    out = parsed;
}

/// One settable knob: the CLI option that owns it (flags win) and a setter
/// used when the value comes from the config file instead.
struct ConfigBinding {
    CLI::Option* opt = nullptr;
    std::function<void(const std::string&)> apply;
};

using ConfigMap = std::map<std::string, ConfigBinding>;

template <typename T>
void bind_key(ConfigMap& m, std::set<std::string>& known, const std::string& key, CLI::Option* opt,
              T& ref) {
    known.insert(key);
    m[key] = ConfigBinding{opt, [key, &ref](const std::string& v) { parse_into(key, v, ref); }};
}

/// Applies file values for the active command. Keys owned by other commands
/// are ignored; keys owned by nobody are an error.
void apply_config(const fs::path& file, const ConfigMap& active, const std::set<std::string>& known) {
    if (file.empty()) return;
    for (const auto& [key, value] : parse_config_file(file)) {
        const auto it = active.find(key);
        if (it == active.end()) {
            if (!known.count(key)) throw UsageError("config key '" + key + "' is not recognized");
            continue;  // belongs to a different subcommand
        }
        if (it->second.opt->count() == 0) it->second.apply(value);
    }
}

// ---------------------------------------------------------------------------

struct GlobalOpts {
    std::uint64_t seed = 0;
    int threads = 0;
    bool json = false;
    fs::path config_file;
};

std::string epoch_record(const EpochStats& s) {
    std::string rec = "{\"epoch\":" + std::to_string(s.epoch);
    rec += ",\"mean_loss\":" + json_number(s.mean_loss);
    rec += ",\"train_accuracy\":" + json_number(s.train_accuracy);
    if (s.has_heldout) rec += ",\"heldout_accuracy\":" + json_number(s.heldout_accuracy);
    return rec + "}";
}

int cmd_ingest(const fs::path& src, const fs::path& out, const GlobalOpts& g) {
    IngestResult r = ingest(src);
    write_ingested(r.samples, out);
    if (g.json) {
        std::cout << r.report.to_json() << "\n";
    } else {
        std::cout << "decoded " << r.report.decoded << ", corrupt " << r.report.corrupt
                  << ", duplicates removed " << r.report.duplicates_removed << "\n"
                  << "kept: spam " << r.report.kept_spam << ", normal " << r.report.kept_normal << "\n"
                  << "wrote " << r.samples.size() << " normalized images under " << out.string() << "\n";
    }
    return 0;
}

int cmd_train(const fs::path& data, const fs::path& ckpt, fs::path history, const TrainConfig& tc,
              const GlobalOpts& g) {
    IngestResult r = ingest(data);
    DatasetSplit ds = split(std::move(r.samples), g.seed);
    if (history.empty()) history = ckpt.string() + ".history.jsonl";

    Model model = build_model(g.seed);
    std::string history_lines;
    const TrainHistory hist = train(model, ds, tc, [&](const EpochStats& s) {
        history_lines += epoch_record(s) + "\n";
        if (!g.json) {
            std::cerr << "epoch " << s.epoch << "/" << tc.epochs << "  loss " << s.mean_loss
                      << "  train acc " << s.train_accuracy;
            if (s.has_heldout) std::cerr << "  held-out acc " << s.heldout_accuracy;
            std::cerr << "\n";
        }
    });
    save_checkpoint(model, ckpt);
    write_file_atomic(history, history_lines);

    const EpochStats& last = hist.epochs.back();
    if (g.json) {
        std::string out = "{\"train_samples\":" + std::to_string(ds.train.size());
        out += ",\"test_samples\":" + std::to_string(ds.test.size());
        out += ",\"epochs\":" + std::to_string(last.epoch);
        out += ",\"final_mean_loss\":" + json_number(last.mean_loss);
        out += ",\"final_train_accuracy\":" + json_number(last.train_accuracy);
        if (last.has_heldout) out += ",\"final_heldout_accuracy\":" + json_number(last.heldout_accuracy);
        out += ",\"checkpoint\":" + json_string(ckpt.string());
        out += ",\"history\":" + json_string(history.string());
        std::cout << out << "}\n";
    } else {
        std::cout << "trained " << last.epoch << " epochs on " << ds.train.size() << " samples ("
                  << ds.test.size() << " held out)\n"
                  << "final loss " << last.mean_loss << ", train accuracy " << last.train_accuracy << "\n"
                  << "checkpoint: " << ckpt.string() << "\nhistory: " << history.string() << "\n";
    }
    return 0;
}

int cmd_eval(const fs::path& ckpt, const fs::path& data, float threshold, const GlobalOpts& g) {
    const Model model = load_checkpoint(ckpt);
    const IngestResult r = ingest(data);
    const auto n = static_cast<std::int64_t>(r.samples.size());
    std::vector<int> preds(r.samples.size()), labels(r.samples.size());
    parallel_for(0, n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            preds[static_cast<std::size_t>(i)] =
                predict(model, r.samples[static_cast<std::size_t>(i)].image, threshold).label;
            labels[static_cast<std::size_t>(i)] = r.samples[static_cast<std::size_t>(i)].label;
        }
    });
    const ConfusionMatrix cm = confusion(preds, labels);
    if (g.json)
        std::cout << metrics_json(cm) << "\n";
    else
        std::cout << metrics_table(cm);
    return 0;
}

struct ExplainOpts {
    std::string method;
    fs::path out_prefix;
    int segments = 50;
    int samples = 0;  // 0 = each method's own default
    double kernel_width = 0.25;
    double ridge = 1e-3;
    int sparsity = 10;
    int exact_threshold = 12;
    int patch = 16;
    int stride = 8;
};

int cmd_explain(const fs::path& ckpt, const fs::path& image_path, const ExplainOpts& o,
                const GlobalOpts& g) {
    const Model model = load_checkpoint(ckpt);
    const std::optional<RawImage> raw = decode_image_file(image_path);
    if (!raw) throw ImageError("cannot decode " + image_path.string());
    const Tensor img = normalize_image(*raw);

    // The sigmoid is evaluated in double from the float logit so explainers
    // keep a usable signal even when the probability saturates in float.
    const ModelFn fn = [&model](const Tensor& t) {
        const double z = static_cast<double>(forward_logit(model, t));
        return 1.0 / (1.0 + std::exp(-z));
    };

    std::string json;
    Tensor attribution;
    std::optional<Segmentation> seg;
    if (o.method == "lime") {
        seg = segment(img, o.segments);
        LimeConfig lc;
        lc.num_segments = o.segments;
        if (o.samples > 0) lc.num_samples = o.samples;
        lc.kernel_width = o.kernel_width;
        lc.ridge = o.ridge;
        lc.sparsity = std::min(o.sparsity, o.segments);
        lc.seed = g.seed;
        const LimeExplanation e = explain(img, *seg, fn, lc);
        json = lime_json(e);
        attribution = broadcast_attribution(*seg, e.segment_weights);
    } else if (o.method == "shap") {
        seg = segment(img, o.segments);
        ShapConfig sc;
        if (o.samples > 0) sc.num_samples = o.samples;
        sc.exact_threshold = o.exact_threshold;
        sc.seed = g.seed;
        const ShapExplanation e = kernel_shap(img, *seg, fn, sc);
        json = shap_json(e);
        attribution = broadcast_attribution(*seg, e.phi);
    } else {  // heatmap
        const Heatmap h = occlusion_map(img, fn, o.patch, o.stride);
        json = heatmap_json(h);
        attribution = upsample_attribution(h, img.dim(0), img.dim(1));
    }

    fs::path prefix = o.out_prefix;
    if (prefix.empty()) prefix = image_path.parent_path() / (image_path.stem().string() + "." + o.method);
    const fs::path json_path = prefix.string() + ".json";
    const fs::path png_path = prefix.string() + ".png";
    write_file_atomic(json_path, json + "\n");
    write_png(png_path, render_overlay(img, attribution));
    fs::path seg_path;
    if (seg) {
        seg_path = prefix.string() + ".segments.png";
        write_file_atomic(seg_path, segmentation_png(*seg));
    }

    if (g.json) {
        std::cout << json << "\n";
    } else {
        std::cout << "wrote " << json_path.string() << ", " << png_path.string();
        if (!seg_path.empty()) std::cout << ", " << seg_path.string();
        std::cout << "\n";
    }
    return 0;
}

int cmd_gen_synthetic(const fs::path& out, int n, const GlobalOpts& g) {
    gen_synthetic(n, g.seed, out);
    if (g.json)
        std::cout << "{\"out\":" << json_string(out.string()) << ",\"per_class\":" << n
                  << ",\"files\":" << 2 * n << ",\"seed\":" << g.seed << "}\n";
    else
        std::cout << "wrote " << n << " spam + " << n << " normal JPEGs under " << out.string()
                  << " (seed " << g.seed << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"image-spam CNN with LIME, Kernel SHAP, and occlusion explanations"};
    app.fallthrough(true);
    app.require_subcommand(1);

    GlobalOpts g;
    std::set<std::string> known_keys;
    ConfigMap global_keys;
    auto* seed_opt = app.add_option("--seed", g.seed, "seed shared by every randomized stage")
                         ->capture_default_str();
    auto* threads_opt =
        app.add_option("--threads", g.threads, "worker thread cap (0 = machine parallelism)")
            ->capture_default_str();
    auto* json_opt = app.add_flag("--json", g.json, "emit machine-readable JSON on stdout");
    app.add_option("--config", g.config_file, "key=value defaults file; flags override it");
    bind_key(global_keys, known_keys, "seed", seed_opt, g.seed);
    bind_key(global_keys, known_keys, "threads", threads_opt, g.threads);
    bind_key(global_keys, known_keys, "json", json_opt, g.json);

    // ingest SRC OUT
    fs::path ingest_src, ingest_out;
    CLI::App* c_ingest = app.add_subcommand("ingest", "decode, dedup, and normalize a labeled corpus");
    c_ingest->add_option("src", ingest_src, "directory with spam/ and normal/ subdirectories")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_ingest->add_option("out", ingest_out, "destination for normalized PNGs")->required();
    ConfigMap ingest_keys;

    // train DATA CKPT
    fs::path train_data, train_ckpt, train_history;
    TrainConfig tc;
    CLI::App* c_train = app.add_subcommand("train", "ingest a corpus, split 3:1, and train the CNN");
    c_train->add_option("data", train_data, "labeled corpus directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_train->add_option("out", train_ckpt, "checkpoint path to write")->required();
    ConfigMap train_keys;
    auto* epochs_opt = c_train->add_option("--epochs", tc.epochs)->capture_default_str();
    auto* batch_opt = c_train->add_option("--batch-size", tc.batch_size)->capture_default_str();
    auto* lr_opt = c_train->add_option("--learning-rate", tc.learning_rate)->capture_default_str();
    auto* heldout_opt =
        c_train->add_flag("--heldout", tc.eval_heldout, "score the held-out split every epoch");
    auto* history_opt = c_train->add_option("--history", train_history,
                                            "JSON-lines epoch log (default: <out>.history.jsonl)");
    bind_key(train_keys, known_keys, "epochs", epochs_opt, tc.epochs);
    bind_key(train_keys, known_keys, "batch-size", batch_opt, tc.batch_size);
    bind_key(train_keys, known_keys, "learning-rate", lr_opt, tc.learning_rate);
    bind_key(train_keys, known_keys, "heldout", heldout_opt, tc.eval_heldout);
    (void)history_opt;

    // eval CKPT DATA
    fs::path eval_ckpt, eval_data;
    float eval_threshold = 0.5f;
    CLI::App* c_eval = app.add_subcommand("eval", "score a labeled directory with a trained model");
    c_eval->add_option("checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
    c_eval->add_option("data", eval_data, "labeled corpus directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    ConfigMap eval_keys;
    auto* thr_opt = c_eval->add_option("--threshold", eval_threshold, "spam decision boundary")
                        ->capture_default_str()
                        ->check(CLI::Range(0.0, 1.0));
    bind_key(eval_keys, known_keys, "threshold", thr_opt, eval_threshold);

    // explain CKPT IMAGE --method M
    fs::path explain_ckpt, explain_image;
    ExplainOpts eo;
    CLI::App* c_explain = app.add_subcommand("explain", "explain one prediction and render the overlay");
    c_explain->add_option("checkpoint", explain_ckpt)->required()->check(CLI::ExistingFile);
    c_explain->add_option("image", explain_image)->required()->check(CLI::ExistingFile);
    c_explain->add_option("--method", eo.method, "lime, shap, or heatmap")
        ->required()
        ->check(CLI::IsMember({"lime", "shap", "heatmap"}));
    c_explain->add_option("--out-prefix", eo.out_prefix,
                          "output prefix (default: <image>.<method> beside the input)");
    ConfigMap explain_keys;
    auto* segments_opt = c_explain->add_option("--segments", eo.segments, "superpixel count")
                             ->capture_default_str();
    auto* samples_opt = c_explain->add_option(
        "--samples", eo.samples, "perturbation/coalition budget (0 = method default: 1000 lime, 2048 shap)");
    auto* kw_opt = c_explain->add_option("--kernel-width", eo.kernel_width)->capture_default_str();
    auto* ridge_opt = c_explain->add_option("--ridge", eo.ridge)->capture_default_str();
    auto* sparsity_opt = c_explain->add_option("--sparsity", eo.sparsity)->capture_default_str();
    auto* exact_opt = c_explain
                          ->add_option("--exact-threshold", eo.exact_threshold,
                                       "enumerate all coalitions when segments <= this")
                          ->capture_default_str();
    auto* patch_opt = c_explain->add_option("--patch", eo.patch)->capture_default_str();
    auto* stride_opt = c_explain->add_option("--stride", eo.stride)->capture_default_str();
    bind_key(explain_keys, known_keys, "segments", segments_opt, eo.segments);
    bind_key(explain_keys, known_keys, "samples", samples_opt, eo.samples);
    bind_key(explain_keys, known_keys, "kernel-width", kw_opt, eo.kernel_width);
    bind_key(explain_keys, known_keys, "ridge", ridge_opt, eo.ridge);
    bind_key(explain_keys, known_keys, "sparsity", sparsity_opt, eo.sparsity);
    bind_key(explain_keys, known_keys, "exact-threshold", exact_opt, eo.exact_threshold);
    bind_key(explain_keys, known_keys, "patch", patch_opt, eo.patch);
    bind_key(explain_keys, known_keys, "stride", stride_opt, eo.stride);

    // gen-synthetic OUT --n N
    fs::path synth_out;
    int synth_n = 0;
    CLI::App* c_synth = app.add_subcommand("gen-synthetic", "write a deterministic labeled toy corpus");
    c_synth->add_option("out", synth_out, "destination directory")->required();
    c_synth->add_option("--n", synth_n, "images per class")->required()->check(CLI::PositiveNumber);
    ConfigMap synth_keys;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit clean; everything else is usage
    }

    try {
        ConfigMap active = global_keys;
        for (const ConfigMap* m : {&ingest_keys, &train_keys, &eval_keys, &explain_keys, &synth_keys}) {
            const CLI::App* owner = m == &ingest_keys    ? c_ingest
                                    : m == &train_keys   ? c_train
                                    : m == &eval_keys    ? c_eval
                                    : m == &explain_keys ? c_explain
                                                         : c_synth;
            if (owner->parsed()) active.insert(m->begin(), m->end());
        }
        apply_config(g.config_file, active, known_keys);
        set_max_threads(g.threads);
        tc.seed = g.seed;

        if (c_ingest->parsed()) return cmd_ingest(ingest_src, ingest_out, g);
        if (c_train->parsed()) return cmd_train(train_data, train_ckpt, train_history, tc, g);
        if (c_eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_threshold, g);
        if (c_explain->parsed()) return cmd_explain(explain_ckpt, explain_image, eo, g);
        if (c_synth->parsed()) return cmd_gen_synthetic(synth_out, synth_n, g);
        return 2;  // unreachable: require_subcommand(1)
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
