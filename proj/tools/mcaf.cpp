// mcaf: remote-sensing dehazing toolkit.
//
// Subcommands: dehaze, analyze, stratify, metrics, model-info, gradcheck,
// train-toy, niqe-fit. Machine-readable JSON goes to stdout; diagnostics to
// stderr. Exit codes: 0 success, 1 operation failure, 2 usage error.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "mcaf/battery.hpp"
#include "mcaf/dcp.hpp"
#include "mcaf/metrics.hpp"
#include "mcaf/model.hpp"
#include "mcaf/niqe.hpp"
#include "mcaf/pipeline.hpp"
#include "mcaf/train.hpp"
#include "mcaf/weights.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t default_seed() {
    if (const char* env = std::getenv("MCAF_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

// temp-file + rename so failed runs never leave partial outputs
void atomic_save_image(const mcaf::Image& img, const std::string& path) {
    const std::string ext = fs::path(path).extension().string();
    const std::string tmp = path + ".tmp" + ext;
    mcaf::save_image(img, tmp);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw mcaf::IoError("cannot move " + tmp + " into place: " + ec.message());
    }
}

template <typename F>
void parallel_for(size_t n, int jobs, F&& body) {
    if (jobs <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const int count = std::min<int>(jobs, static_cast<int>(n));
    for (int t = 0; t < count; ++t)
        workers.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    for (auto& w : workers) w.join();
}

mcaf::ModelConfig parse_model_config(const std::string& spec) {
    if (spec.empty() || spec == "default") return mcaf::ModelConfig{};
    if (spec == "toy") return mcaf::ModelConfig::toy();

    // key=value lines; lists are comma separated
    std::ifstream in(spec);
    if (!in) throw mcaf::IoError("cannot open config: " + spec);
    mcaf::ModelConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw mcaf::IoError("malformed config line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        auto parse_list5 = [&](std::array<int, 5>& out) {
            std::stringstream ss(value);
            std::string item;
            for (int i = 0; i < 5; ++i) {
                if (!std::getline(ss, item, ',')) throw mcaf::IoError("expected 5 values: " + line);
                out[static_cast<size_t>(i)] = std::stoi(item);
            }
        };
        if (key == "embed_dims")
            parse_list5(cfg.embed_dims);
        else if (key == "depths")
            parse_list5(cfg.depths);
        else if (key == "mfib_cascade")
            cfg.mfib_cascade = std::stoi(value);
        else if (key == "mlp_ratio")
            cfg.mlp_ratio = std::stod(value);
        else if (key == "query_base")
            cfg.query_base = std::stoi(value);
        else
            throw mcaf::IoError("unknown config key: " + key);
    }
    cfg.validate();
    return cfg;
}

std::string config_text(const mcaf::ModelConfig& cfg) {
    std::ostringstream os;
    os << "embed_dims=" << cfg.embed_dims[0];
    for (int i = 1; i < 5; ++i) os << "," << cfg.embed_dims[static_cast<size_t>(i)];
    os << "\ndepths=" << cfg.depths[0];
    for (int i = 1; i < 5; ++i) os << "," << cfg.depths[static_cast<size_t>(i)];
    os << "\nmfib_cascade=" << cfg.mfib_cascade;
    os << "\nmlp_ratio=" << cfg.mlp_ratio;
    os << "\nquery_base=" << cfg.query_base;
    os << "\n";
    return os.str();
}

// replicate-pad to a multiple of four, run the network, crop back
mcaf::Image run_mcafnet(const mcaf::Image& input, const mcaf::ParamStore& params,
                        const mcaf::ModelConfig& cfg) {
    const int64_t ph = (4 - input.h % 4) % 4;
    const int64_t pw = (4 - input.w % 4) % 4;
    mcaf::Image padded(input.h + ph, input.w + pw);
    for (int64_t y = 0; y < padded.h; ++y)
        for (int64_t x = 0; x < padded.w; ++x)
            for (int c = 0; c < 3; ++c)
                padded.at(y, x, c) = input.at(std::min(y, input.h - 1), std::min(x, input.w - 1), c);

    const mcaf::Tensor out = mcaf::mcafnet_infer(params, cfg, mcaf::image_to_tensor(padded));
    mcaf::Image result(input.h, input.w);
    result.geo = input.geo;
    for (int64_t y = 0; y < input.h; ++y)
        for (int64_t x = 0; x < input.w; ++x)
            for (int c = 0; c < 3; ++c) result.at(y, x, c) = out.at(0, c, y, x);
    return result;
}

std::vector<std::string> list_dir_images(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".ppm") out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------

int cmd_dehaze(const std::string& method, const std::string& input, const std::string& output,
               const std::string& weights, const std::string& config, bool report) {
    const mcaf::Image img = mcaf::load_image(input);
    if (method == "dcp") {
        const mcaf::DehazeResult res = mcaf::dcp_dehaze(img);
        atomic_save_image(res.output, output);
        if (report) std::cout << mcaf::haze_report_json(input, res.report) << "\n";
    } else {
        const mcaf::ModelConfig cfg = parse_model_config(config);
        mcaf::ParamStore params = mcaf::init_mcafnet_params<float>(cfg, default_seed());
        if (!weights.empty()) mcaf::load_params_into(weights, params);
        atomic_save_image(run_mcafnet(img, params, cfg), output);
    }
    return 0;
}

int cmd_analyze(const std::vector<std::string>& inputs, int jobs, int radius) {
    std::vector<std::string> lines(inputs.size());
    std::vector<std::string> errors(inputs.size());
    mcaf::DcpConfig cfg;
    cfg.patch_radius = radius;
    parallel_for(inputs.size(), jobs, [&](size_t i) {
        try {
            const mcaf::Image img = mcaf::load_image(inputs[i]);
            lines[i] = mcaf::haze_report_json(inputs[i], mcaf::make_haze_report(img, cfg));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    int failures = 0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "error: " << errors[i] << "\n";
            ++failures;
        } else {
            std::cout << lines[i] << "\n";
        }
    }
    return failures ? 1 : 0;
}

int cmd_stratify(const std::string& hazy, const std::string& clear, const std::string& out,
                 uint64_t seed) {
    mcaf::ManifestConfig cfg;
    cfg.seed = seed;
    const mcaf::Manifest m = mcaf::build_manifest(hazy, clear, cfg);
    for (const std::string& e : m.exceptions) std::cerr << "warning: " << e << "\n";
    mcaf::save_manifest(m, out);
    json j;
    j["records"] = m.records.size();
    j["exceptions"] = m.exceptions.size();
    j["out"] = out;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_metrics(const std::string& ref, const std::string& test, const std::string& niqe_model,
                int jobs) {
    std::unique_ptr<mcaf::NiqeModel> niqe;
    if (!niqe_model.empty()) niqe = std::make_unique<mcaf::NiqeModel>(mcaf::niqe_load(niqe_model));

    auto evaluate = [&](const std::string& r, const std::string& t) {
        const mcaf::Image ri = mcaf::load_image(r);
        const mcaf::Image ti = mcaf::load_image(t);
        mcaf::MetricReport rep = mcaf::compute_metrics(ri, ti);
        if (niqe) rep.niqe = mcaf::niqe_score(ti, *niqe);
        return mcaf::metric_report_json(rep, r, t);
    };

    if (fs::is_directory(ref) != fs::is_directory(test))
        throw mcaf::IoError("metrics: --ref and --test must both be files or both directories");
    if (!fs::is_directory(ref)) {
        std::cout << evaluate(ref, test) << "\n";
        return 0;
    }

    std::vector<std::pair<std::string, std::string>> pairs;
    for (const std::string& rp : list_dir_images(ref)) {
        const fs::path tp = fs::path(test) / fs::path(rp).filename();
        if (fs::exists(tp))
            pairs.emplace_back(rp, tp.string());
        else
            std::cerr << "warning: no counterpart for " << rp << "\n";
    }
    std::vector<std::string> lines(pairs.size());
    std::vector<std::string> errors(pairs.size());
    parallel_for(pairs.size(), jobs, [&](size_t i) {
        try {
            lines[i] = evaluate(pairs[i].first, pairs[i].second);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    int failures = 0;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "error: " << errors[i] << "\n";
            ++failures;
        } else {
            std::cout << lines[i] << "\n";
        }
    }
    return failures ? 1 : 0;
}

int cmd_model_info(const std::string& config, int height, int width, bool pretty) {
    const mcaf::ModelConfig cfg = parse_model_config(config);
    const mcaf::ModelCost cost = mcaf::count_params_flops(cfg, height, width);
    if (pretty) {
        std::cout << config_text(cfg);
        std::cout << "input=" << height << "x" << width << "\n";
        std::cout << "params=" << cost.params << "\n";
        std::cout << "macs=" << cost.flops / mcaf::macs::kFlopsPerMac << "\n";
        std::cout << "flops=" << cost.flops << " (" << mcaf::macs::kFlopsPerMac << " per MAC)\n";
        return 0;
    }
    json j;
    j["config_text"] = config_text(cfg);
    j["embed_dims"] = cfg.embed_dims;
    j["depths"] = cfg.depths;
    j["mfib_cascade"] = cfg.mfib_cascade;
    j["mlp_ratio"] = cfg.mlp_ratio;
    j["query_base"] = cfg.query_base;
    j["height"] = height;
    j["width"] = width;
    j["params"] = cost.params;
    j["flops"] = cost.flops;
    j["flops_per_mac"] = mcaf::macs::kFlopsPerMac;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_gradcheck(double tol, int graphs, uint64_t seed) {
    const mcaf::BatteryResult r = mcaf::gradcheck_battery(graphs, tol, 1e-4, seed);
    json j;
    j["graphs"] = r.graphs;
    j["failed"] = r.failed;
    j["checked"] = r.checked;
    j["max_rel_err"] = r.max_rel_err;
    if (!r.worst.empty()) {
        json worst = json::array();
        for (const auto& e : r.worst) {
            json w;
            w["param"] = e.param;
            w["index"] = e.index;
            w["analytic"] = e.analytic;
            w["numeric"] = e.numeric;
            w["rel_err"] = e.rel_err;
            worst.push_back(w);
        }
        j["worst"] = worst;
    }
    std::cout << j.dump() << "\n";
    return r.failed == 0 ? 0 : 1;
}

int cmd_train_toy(const std::string& hazy, const std::string& clear, int steps,
                  const std::string& out, double lr, uint64_t seed, const std::string& extractor,
                  double lambda) {
    const mcaf::Image hi = mcaf::load_image(hazy);
    const mcaf::Image ci = mcaf::load_image(clear);
    if (hi.h != ci.h || hi.w != ci.w) throw mcaf::ShapeError("train-toy: image size mismatch");
    if (hi.h % 4 != 0 || hi.w % 4 != 0)
        throw mcaf::ShapeError("train-toy: image dims must be divisible by 4");

    mcaf::TrainConfig tcfg;
    tcfg.steps = steps;
    tcfg.lr = lr;
    tcfg.seed = seed;
    mcaf::LossConfig lcfg;
    lcfg.lambda = lambda;
    lcfg.extractor = extractor == "conv" ? mcaf::ExtractorKind::conv_stack : mcaf::ExtractorKind::identity;
    lcfg.extractor_seed = seed;

    const mcaf::TrainResult r = mcaf::train_overfit(mcaf::image_to_tensor(hi), mcaf::image_to_tensor(ci),
                                                    mcaf::ModelConfig::toy(), tcfg, lcfg);
    std::cout << mcaf::trace_to_jsonl(r.trace);
    if (!out.empty()) mcaf::save_params(out, r.params);
    return 0;
}

int cmd_niqe_fit(const std::string& corpus_dir, const std::string& out, int patch) {
    std::vector<mcaf::Image> corpus;
    for (const std::string& path : list_dir_images(corpus_dir)) corpus.push_back(mcaf::load_image(path));
    mcaf::NiqeConfig cfg;
    cfg.patch_size = patch;
    const mcaf::NiqeModel model = mcaf::niqe_fit(corpus, cfg);
    mcaf::niqe_save(model, out);
    json j;
    j["corpus"] = corpus.size();
    j["patch"] = model.patch_size;
    j["regularized"] = model.regularized;
    j["out"] = out;
    std::cout << j.dump() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"remote-sensing dehazing toolkit"};
    app.require_subcommand(1);

    // dehaze
    std::string dh_method, dh_in, dh_out, dh_weights, dh_config = "default";
    bool dh_report = false;
    auto* dehaze = app.add_subcommand("dehaze", "dehaze one image");
    dehaze->add_option("--method", dh_method, "dcp or mcafnet")
        ->required()
        ->check(CLI::IsMember({"dcp", "mcafnet"}));
    dehaze->add_option("--weights", dh_weights, "weight file for mcafnet");
    dehaze->add_option("--config", dh_config, "model config: default, toy, or a key=value file");
    dehaze->add_flag("--report", dh_report, "print the haze report (dcp only)");
    dehaze->add_option("input", dh_in, "input image (png or ppm)")->required();
    dehaze->add_option("output", dh_out, "output image")->required();

    // analyze
    std::vector<std::string> an_inputs;
    int an_jobs = 1, an_radius = 7;
    auto* analyze = app.add_subcommand("analyze", "haze reports for images");
    analyze->add_option("inputs", an_inputs, "input images")->required();
    analyze->add_option("--jobs", an_jobs, "worker threads")->check(CLI::PositiveNumber);
    analyze->add_option("--radius", an_radius, "dark channel patch radius");

    // stratify
    std::string st_hazy, st_clear, st_out;
    uint64_t st_seed = default_seed();
    auto* stratify = app.add_subcommand("stratify", "build a dataset manifest");
    stratify->add_option("--hazy", st_hazy, "hazy image directory")->required();
    stratify->add_option("--clear", st_clear, "clear image directory")->required();
    stratify->add_option("--out", st_out, "manifest path (jsonl)")->required();
    stratify->add_option("--seed", st_seed, "split shuffle seed");

    // metrics
    std::string me_ref, me_test, me_niqe;
    int me_jobs = 1;
    auto* metrics = app.add_subcommand("metrics", "full-reference metrics (plus optional niqe)");
    metrics->add_option("--ref", me_ref, "reference image or directory")->required();
    metrics->add_option("--test", me_test, "test image or directory")->required();
    metrics->add_option("--niqe-model", me_niqe, "niqe model file");
    metrics->add_option("--jobs", me_jobs, "worker threads")->check(CLI::PositiveNumber);

    // model-info
    std::string mi_config = "default";
    int mi_h = 256, mi_w = 256;
    bool mi_pretty = false;
    auto* model_info = app.add_subcommand("model-info", "parameter and flops accounting");
    model_info->add_option("--config", mi_config, "model config: default, toy, or a key=value file");
    model_info->add_option("--height", mi_h, "input height");
    model_info->add_option("--width", mi_w, "input width");
    model_info->add_flag("--pretty", mi_pretty, "human-readable output");

    // gradcheck
    double gc_tol = 1e-4;
    int gc_graphs = 100;
    uint64_t gc_seed = default_seed();
    auto* gradcheck = app.add_subcommand("gradcheck", "verify gradients against finite differences");
    gradcheck->add_option("--tol", gc_tol, "relative error tolerance");
    gradcheck->add_option("--graphs", gc_graphs, "number of random graphs")->check(CLI::PositiveNumber);
    gradcheck->add_option("--seed", gc_seed, "graph generator seed");

    // train-toy
    std::string tt_hazy, tt_clear, tt_out;
    int tt_steps = 200;
    double tt_lr = 1e-3, tt_lambda = 0.04;
    uint64_t tt_seed = default_seed();
    std::string tt_extractor = "identity";
    auto* train_toy = app.add_subcommand("train-toy", "overfit the toy model on one pair");
    train_toy->add_option("--hazy", tt_hazy, "hazy input image")->required();
    train_toy->add_option("--clear", tt_clear, "clear target image")->required();
    train_toy->add_option("--steps", tt_steps, "training steps")->check(CLI::NonNegativeNumber);
    train_toy->add_option("--out", tt_out, "weight file to write");
    train_toy->add_option("--lr", tt_lr, "initial learning rate");
    train_toy->add_option("--seed", tt_seed, "initialization seed");
    train_toy->add_option("--lambda", tt_lambda, "perceptual weight");
    train_toy->add_option("--extractor", tt_extractor, "perceptual extractor")
        ->check(CLI::IsMember({"identity", "conv"}));

    // niqe-fit
    std::string nf_corpus, nf_out;
    int nf_patch = 96;
    auto* niqe_fit_cmd = app.add_subcommand("niqe-fit", "fit a niqe model from a pristine corpus");
    niqe_fit_cmd->add_option("--corpus", nf_corpus, "directory of pristine images")->required();
    niqe_fit_cmd->add_option("--out", nf_out, "model file to write")->required();
    niqe_fit_cmd->add_option("--patch", nf_patch, "patch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*dehaze) return cmd_dehaze(dh_method, dh_in, dh_out, dh_weights, dh_config, dh_report);
        if (*analyze) return cmd_analyze(an_inputs, an_jobs, an_radius);
        if (*stratify) return cmd_stratify(st_hazy, st_clear, st_out, st_seed);
        if (*metrics) return cmd_metrics(me_ref, me_test, me_niqe, me_jobs);
        if (*model_info) return cmd_model_info(mi_config, mi_h, mi_w, mi_pretty);
        if (*gradcheck) return cmd_gradcheck(gc_tol, gc_graphs, gc_seed);
        if (*train_toy)
            return cmd_train_toy(tt_hazy, tt_clear, tt_steps, tt_out, tt_lr, tt_seed, tt_extractor,
                                 tt_lambda);
        if (*niqe_fit_cmd) return cmd_niqe_fit(nf_corpus, nf_out, nf_patch);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
