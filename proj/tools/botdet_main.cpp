/* botdet_main.cpp
 *
 * Command-line front end: extract, rank, train, eval, detect.
 * Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/IO error.
 */
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>

#include "botdet/pipeline.hpp"

namespace {

using namespace botdet;

std::vector<LabeledInput> parse_labeled_inputs(const std::vector<std::string>& raw) {
    std::vector<LabeledInput> out;
    for (const auto& s : raw) {
        size_t pos = s.rfind(':');
        if (pos == std::string::npos || pos == 0)
            throw UsageError("input '" + s + "' needs a label suffix (path:nonmalicious|malicious)");
        std::string path = s.substr(0, pos);
        std::string label = s.substr(pos + 1);
        int l;
        if (label == "nonmalicious")
            l = 0;
        else if (label == "malicious")
            l = 1;
        else
            throw UsageError("bad label '" + label + "' (use nonmalicious or malicious)");
        out.push_back({path, l});
    }
    return out;
}

std::pair<int, int> parse_hidden_range(const std::string& s) {
    size_t pos = s.find(':');
    if (pos == std::string::npos) {
        int v = std::stoi(s);
        return {v, v};
    }
    int lo = std::stoi(s.substr(0, pos));
    int hi = std::stoi(s.substr(pos + 1));
    if (lo < 1 || hi < lo) throw UsageError("bad --hidden-range '" + s + "'");
    return {lo, hi};
}

int run(int argc, char** argv) {
    CLI::App app{"Flow-based P2P botnet detector: flow metering, information-gain feature "
                 "ranking, Bayesian-regularized neural network training, and real-time "
                 "classification with malicious-only pcap output"};
    app.require_subcommand(1);

    std::vector<std::string> inputs;
    std::string interface_name, model_path, out_dir = ".";
    double threshold = 0.5;
    size_t top_k = 15;
    uint64_t seed = 1;
    std::string hidden_range = "2:20";
    uint64_t chunk_bytes = 200'000'000;
    int64_t activity_us = 1'000'000;
    int64_t idle_us = 600'000'000;
    int64_t ooo_us = 1'000;
    int64_t early_us = 120'000'000;
    int max_epochs = 300;
    bool want_arff = false;

    auto add_meter_flags = [&](CLI::App* cmd) {
        cmd->add_option("--activity-threshold-us", activity_us,
                        "gap splitting active periods (default 1s)");
        cmd->add_option("--idle-timeout-us", idle_us, "flow expiry (default 600s)");
        cmd->add_option("--ooo-tolerance-us", ooo_us, "silent reordering window (default 1ms)");
    };

    CLI::App* extract = app.add_subcommand("extract", "pcaps -> labeled flow CSV");
    extract->add_option("--input", inputs, "pcap path:label (repeatable)")->required();
    extract->add_option("--out-dir", out_dir, "output directory");
    extract->add_flag("--arff", want_arff, "also write flows.arff");
    add_meter_flags(extract);

    CLI::App* rank = app.add_subcommand("rank", "rank features by information gain");
    rank->add_option("--input", inputs, "labeled CSV")->required();
    rank->add_option("--top-k", top_k, "features to keep (default 15)");
    rank->add_option("--out-dir", out_dir, "output directory");

    CLI::App* train = app.add_subcommand("train", "train the BR-ANN on a labeled CSV");
    train->add_option("--input", inputs, "labeled CSV")->required();
    train->add_option("--top-k", top_k, "features to keep (default 15)");
    train->add_option("--seed", seed, "RNG seed");
    train->add_option("--hidden-range", hidden_range, "hidden sizes to sweep, e.g. 2:20");
    train->add_option("--max-epochs", max_epochs, "training epochs per candidate");
    train->add_option("--threshold", threshold, "malicious score threshold");
    train->add_option("--out-dir", out_dir, "output directory");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a model against a labeled CSV");
    eval->add_option("--model", model_path, "model file")->required();
    eval->add_option("--input", inputs, "labeled CSV")->required();
    eval->add_option("--threshold", threshold, "malicious score threshold");
    eval->add_option("--out-dir", out_dir, "output directory");

    CLI::App* detect = app.add_subcommand("detect", "classify a capture; emit alerts + "
                                                    "malicious pcap ('-' reads a pcap stream "
                                                    "from stdin)");
    detect->add_option("--input", inputs, "pcap file or '-' for stdin stream");
    detect->add_option("--interface", interface_name, "capture device (unsupported here)");
    detect->add_option("--model", model_path, "model file")->required();
    detect->add_option("--threshold", threshold, "malicious score threshold");
    detect->add_option("--chunk-bytes", chunk_bytes, "chunk rotation size (default 200MB)");
    detect->add_option("--early-classify-us", early_us,
                       "classify flows still open past this age (default 120s)");
    detect->add_option("--out-dir", out_dir, "output directory");
    add_meter_flags(detect);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    MeterConfig meter;
    meter.activity_threshold_us = activity_us;
    meter.idle_timeout_us = idle_us;
    meter.ooo_tolerance_us = ooo_us;

    if (extract->parsed()) {
        auto labeled = parse_labeled_inputs(inputs);
        std::filesystem::create_directories(out_dir);
        std::string csv = out_dir + "/flows.csv";
        std::string arff = want_arff ? out_dir + "/flows.arff" : "";
        ExtractSummary s = cmd_extract(labeled, meter, csv, arff);
        std::printf("files=%zu packets=%llu admitted=%llu skipped=%llu malformed=%llu flows=%zu\n",
                    s.files, (unsigned long long)s.packets, (unsigned long long)s.admitted,
                    (unsigned long long)s.skipped, (unsigned long long)s.malformed, s.flows);
        std::printf("wrote %s\n", csv.c_str());
        return 0;
    }

    if (rank->parsed()) {
        if (inputs.size() != 1) throw UsageError("rank: exactly one --input CSV");
        std::filesystem::create_directories(out_dir);
        RankOutput out = cmd_rank(inputs[0], top_k, out_dir + "/ranking.txt");
        for (const auto& [name, gain] : out.ranked.entries)
            std::printf("%.6f\t%s\n", gain, name.c_str());
        return 0;
    }

    if (train->parsed()) {
        if (inputs.size() != 1) throw UsageError("train: exactly one --input CSV");
        auto [hlo, hhi] = parse_hidden_range(hidden_range);
        TrainingConfig cfg;
        cfg.hidden_min = hlo;
        cfg.hidden_max = hhi;
        cfg.seed = seed;
        cfg.max_epochs = max_epochs;
        TrainOutput out = cmd_train(inputs[0], cfg, top_k, threshold, out_dir);
        std::printf("model_id=%s n_hidden=%d heldout_r=%.4f test_accuracy=%.4f test_r=%.4f\n",
                    out.model_id.c_str(), out.report.n_hidden, out.report.heldout_pearson,
                    out.eval.confusion.accuracy, out.eval.pearson_r);
        std::printf("wrote %s/model.brann\n", out_dir.c_str());
        return 0;
    }

    if (eval->parsed()) {
        if (inputs.size() != 1) throw UsageError("eval: exactly one --input CSV");
        EvalReport rep = cmd_eval(model_path, inputs[0], threshold, out_dir);
        std::printf("instances=%zu accuracy=%.4f precision=%.4f recall=%.4f pearson_r=%.4f\n",
                    rep.labels.size(), rep.confusion.accuracy, rep.confusion.precision,
                    rep.confusion.recall, rep.pearson_r);
        return 0;
    }

    if (detect->parsed()) {
        if (!interface_name.empty())
            throw std::runtime_error(
                "detect: live device capture is not supported in this build; stream a pcap "
                "to stdin with --input - instead");
        if (inputs.size() != 1) throw UsageError("detect: exactly one --input source");
        NetworkModel model = load_model(model_path);
        DetectConfig dcfg;
        dcfg.meter = meter;
        dcfg.threshold = threshold;
        dcfg.chunk_bytes = chunk_bytes;
        dcfg.early_classify_us = early_us;
        std::unique_ptr<PcapReader> reader;
        if (inputs[0] == "-")
            reader = std::make_unique<PcapReader>(stdin, /*live=*/false);
        else
            reader = std::make_unique<PcapReader>(inputs[0]);
        DetectSummary s = cmd_detect(*reader, model, model.model_id, dcfg, out_dir);
        std::printf("packets=%llu admitted=%llu flows=%zu malicious_flows=%zu "
                    "malicious_packets=%llu dropped=%llu\n",
                    (unsigned long long)s.packets, (unsigned long long)s.admitted, s.flows,
                    s.malicious_flows, (unsigned long long)s.malicious_packets,
                    (unsigned long long)s.dropped);
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const botdet::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const botdet::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const botdet::pcap_bad_magic& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const botdet::model_format_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
