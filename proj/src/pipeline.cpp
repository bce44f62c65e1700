#include "botdet/pipeline.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace botdet {

namespace fs = std::filesystem;

ChunkWriter::ChunkWriter(std::string dir, int link_type, uint64_t chunk_bytes)
    : dir_(std::move(dir)), link_type_(link_type), limit_(chunk_bytes) {
    fs::create_directories(dir_);
    rotate();
}

void ChunkWriter::rotate() {
    writer_.close();
    char name[32];
    std::snprintf(name, sizeof(name), "chunk_%05d.pcap", ++counter_);
    std::string path = dir_ + "/" + name;
    writer_ = PcapWriter(path, link_type_);
    paths_.push_back(path);
    current_packets_ = 0;
}

void ChunkWriter::write(const RawFrame& frame) {
    uint64_t rec_bytes = PcapWriter::kRecordHeaderBytes + frame.data.size();
    if (current_packets_ > 0 && writer_.bytes_written() + rec_bytes > limit_) rotate();
    writer_.write(frame);
    ++current_packets_;
    ++packets_;
}

void ChunkWriter::close() {
    writer_.close();
}

ExtractSummary cmd_extract(const std::vector<LabeledInput>& inputs, const MeterConfig& meter,
                           const std::string& csv_path, const std::string& arff_path) {
    if (inputs.empty()) throw UsageError("extract: no inputs given");
    ExtractSummary sum;
    std::vector<FeatureVector> all_flows;

    for (const auto& input : inputs) {
        PcapReader reader(input.path);  // throws on unreadable/bad magic
        FlowTable table(meter);
        RawFrame frame;
        auto collect = [&](std::vector<FeatureVector>&& batch) {
            for (auto& fv : batch) {
                fv.label = input.label;
                all_flows.push_back(std::move(fv));
            }
        };
        while (reader.next(frame)) {
            ++sum.packets;
            ParseResult pr = parse_packet(frame.data, frame.link_type, frame.ts_us);
            switch (pr.status) {
                case ParseStatus::ok:
                    ++sum.admitted;
                    collect(table.ingest(pr.record));
                    break;
                case ParseStatus::skip:
                    ++sum.skipped;
                    break;
                default:
                    ++sum.malformed;
                    break;
            }
        }
        collect(table.flush());
        ++sum.files;
    }
    if (all_flows.empty()) throw DataError("extract: zero flows extracted");
    sum.flows = all_flows.size();

    Dataset ds = dataset_from_flows(all_flows);
    write_csv(ds, csv_path);
    if (!arff_path.empty()) write_arff(ds, arff_path);
    return sum;
}

RankOutput cmd_rank(const std::string& csv_path, size_t top_k, const std::string& out_path) {
    Dataset ds = read_csv(csv_path);
    if (!ds.labeled()) throw DataError("rank: CSV is unlabeled");
    Dataset work = drop_identifier_features(ds);
    if (top_k > work.num_features())
        throw UsageError("rank: top-k exceeds usable feature count (" +
                          std::to_string(work.num_features()) + ")");
    RankOutput out{rank_features(work, top_k, {})};
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("rank: cannot create " + out_path);
        char buf[128];
        for (const auto& [name, gain] : out.ranked.entries) {
            std::snprintf(buf, sizeof(buf), "%.6f\t%s\n", gain, name.c_str());
            f << buf;
        }
    }
    return out;
}

namespace {

std::vector<std::string> selected_names(const RankedFeatures& ranked) {
    std::vector<std::string> names;
    names.reserve(ranked.entries.size());
    for (const auto& [name, gain] : ranked.entries) names.push_back(name);
    return names;
}

EvalReport evaluate_model(const NetworkModel& model, const Dataset& ds, double threshold) {
    std::vector<int> index_map = build_index_map(model, ds);
    std::vector<double> scores;
    scores.reserve(ds.num_rows());
    for (const auto& row : ds.rows)
        scores.push_back(classify_row(model, row, index_map, threshold).score);
    return evaluate(scores, ds.labels, threshold);
}

void write_training_report(const TrainOutput& out, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("train: cannot create " + path);
    f << "model_id\t" << out.model_id << '\n';
    f << "n_hidden\t" << out.report.n_hidden << '\n';
    f << "stop_reason\t" << out.report.stop_reason << '\n';
    char buf[256];
    std::snprintf(buf, sizeof(buf), "heldout_pearson\t%.6f\n", out.report.heldout_pearson);
    f << buf;
    f << "hidden_sweep\n";
    for (const auto& [h, r] : out.sweep.correlations) {
        std::snprintf(buf, sizeof(buf), "\t%d\t%.6f\n", h, r);
        f << buf;
    }
    f << "epoch\tE_D\tE_W\tF\talpha\tbeta\tgamma\tmu\n";
    for (const auto& e : out.report.trace) {
        // SSE = 2*E_D, logged alongside for comparison with the halved form
        std::snprintf(buf, sizeof(buf), "%d\t%.8g\t%.8g\t%.8g\t%.6g\t%.6g\t%.4f\t%.3g\n",
                      e.epoch, e.e_data, e.e_weight, e.objective, e.alpha, e.beta, e.gamma,
                      e.mu);
        f << buf;
    }
}

}  // namespace

TrainOutput cmd_train(const std::string& csv_path, const TrainingConfig& cfg, size_t top_k,
                      double threshold, const std::string& out_dir) {
    Dataset raw = read_csv(csv_path);
    if (!raw.labeled()) throw DataError("train: CSV is unlabeled");
    bool has0 = false, has1 = false;
    for (int l : raw.labels) (l == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw DataError("train: need both classes present");

    Dataset ds = drop_identifier_features(raw);
    if (top_k > ds.num_features())
        throw UsageError("train: top-k exceeds usable feature count");

    TrainOutput out;
    out.ranked = rank_features(ds, top_k, {});
    std::vector<std::string> selected = selected_names(out.ranked);

    auto [train_ds, test_ds] = split(ds, cfg.train_fraction, cfg.seed);

    out.sweep = select_hidden(train_ds, selected, cfg);
    TrainResult final_run = train(train_ds, selected, out.sweep.best, cfg);
    out.model = std::move(final_run.model);
    out.report = std::move(final_run.report);

    fs::create_directories(out_dir);
    out.model_id = save_model(out.model, out_dir + "/model.brann");
    out.model.model_id = out.model_id;

    out.eval = evaluate_model(out.model, test_ds, threshold);
    emit_report(out.eval, out_dir);
    write_training_report(out, out_dir + "/training_report.txt");
    {
        std::ofstream f(out_dir + "/ranking.txt");
        char buf[128];
        for (const auto& [name, gain] : out.ranked.entries) {
            std::snprintf(buf, sizeof(buf), "%.6f\t%s\n", gain, name.c_str());
            f << buf;
        }
    }
    return out;
}

EvalReport cmd_eval(const std::string& model_path, const std::string& csv_path,
                    double threshold, const std::string& out_dir) {
    NetworkModel model = load_model(model_path);
    Dataset ds = read_csv(csv_path);
    if (!ds.labeled()) throw DataError("eval: CSV is unlabeled");
    EvalReport rep = evaluate_model(model, ds, threshold);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        emit_report(rep, out_dir);
    }
    return rep;
}

std::string iso8601_us(int64_t ts_us) {
    std::time_t secs = static_cast<std::time_t>(ts_us / 1000000);
    int64_t micros = ts_us % 1000000;
    if (micros < 0) {
        micros += 1000000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<long long>(micros));
    return buf;
}

std::string format_alert_line(const DetectionRecord& rec) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s\t%s:%u>%s:%u/%u\t%.6f\t%s\t%s",
                  iso8601_us(rec.last_ts_us).c_str(), ip_to_string(rec.key.src_ip).c_str(),
                  rec.key.src_port, ip_to_string(rec.key.dst_ip).c_str(), rec.key.dst_port,
                  rec.key.protocol, rec.score, rec.label ? "malicious" : "nonmalicious",
                  rec.model_id.c_str());
    return buf;
}

namespace {

// Bounded single-producer single-consumer frame queue.
class FrameQueue {
public:
    explicit FrameQueue(size_t capacity) : capacity_(capacity) {}

    // returns false when the frame was dropped (live policy)
    bool push(RawFrame&& frame, bool may_drop) {
        std::unique_lock<std::mutex> lock(m_);
        if (may_drop && q_.size() >= capacity_) return false;
        cv_push_.wait(lock, [this] { return q_.size() < capacity_; });
        q_.push_back(std::move(frame));
        cv_pop_.notify_one();
        return true;
    }

    bool pop(RawFrame& out) {
        std::unique_lock<std::mutex> lock(m_);
        cv_pop_.wait(lock, [this] { return !q_.empty() || closed_; });
        if (q_.empty()) return false;
        out = std::move(q_.front());
        q_.pop_front();
        cv_push_.notify_one();
        return true;
    }

    void close() {
        std::lock_guard<std::mutex> lock(m_);
        closed_ = true;
        cv_pop_.notify_all();
    }

private:
    size_t capacity_;
    std::deque<RawFrame> q_;
    bool closed_ = false;
    std::mutex m_;
    std::condition_variable cv_push_, cv_pop_;
};

struct StoredPacket {
    RawFrame frame;
};

}  // namespace

DetectSummary cmd_detect(PacketSource& source, const NetworkModel& model,
                         const std::string& model_id, const DetectConfig& cfg,
                         const std::string& out_dir) {
    // fail fast if the model names a feature the meter does not produce
    const auto& names = feature_names();
    for (const auto& fname : model.feature_names) {
        if (std::find_if(names.begin(), names.end(),
                         [&](const char* n) { return fname == n; }) == names.end())
            throw DataError("detect: model feature '" + fname + "' is not a flow feature");
    }

    fs::create_directories(out_dir);
    std::ofstream alert_log(out_dir + "/alerts.log");
    if (!alert_log) throw std::runtime_error("detect: cannot create alert log");

    DetectSummary sum;
    MeterConfig meter = cfg.meter;
    meter.track_packet_indices = true;
    meter.max_flow_age_us = cfg.early_classify_us;
    FlowTable table(meter);

    ChunkWriter chunks(out_dir + "/chunks", source.link_type(), cfg.chunk_bytes);
    FrameQueue queue(cfg.queue_capacity);
    const bool live = source.is_live();

    std::exception_ptr reader_error;
    std::thread reader([&] {
        try {
            RawFrame frame;
            while (source.next(frame)) {
                chunks.write(frame);
                if (!queue.push(std::move(frame), live)) ++sum.dropped;
            }
        } catch (...) {
            reader_error = std::current_exception();
        }
        queue.close();
    });

    // classifier stage: owns the flow table and all outputs
    std::map<uint64_t, StoredPacket> pending;  // packet index -> frame
    std::vector<RawFrame> malicious_frames;
    uint64_t index = 0;

    auto handle_finalized = [&](std::vector<FeatureVector>&& flows) {
        for (auto& fv : flows) {
            ++sum.flows;
            Classification cls = classify(model, fv, cfg.threshold);
            if (cls.label == 1) {
                DetectionRecord rec;
                rec.key.src_ip = static_cast<uint32_t>(fv[fidx::srcip]);
                rec.key.src_port = static_cast<uint16_t>(fv[fidx::srcport]);
                rec.key.dst_ip = static_cast<uint32_t>(fv[fidx::dstip]);
                rec.key.dst_port = static_cast<uint16_t>(fv[fidx::dstport]);
                rec.key.protocol = static_cast<uint8_t>(fv[fidx::proto]);
                rec.first_ts_us = fv.first_ts_us;
                rec.last_ts_us = fv.last_ts_us;
                rec.score = cls.score;
                rec.label = 1;
                rec.model_id = model_id;
                rec.packet_indices = fv.packet_indices;
                alert_log << format_alert_line(rec) << '\n';
                ++sum.malicious_flows;
                sum.malicious_packets += fv.packet_indices.size();
                for (uint64_t idx : fv.packet_indices) {
                    auto it = pending.find(idx);
                    if (it != pending.end()) {
                        malicious_frames.push_back(std::move(it->second.frame));
                        pending.erase(it);
                    }
                }
                sum.detections.push_back(std::move(rec));
            } else {
                for (uint64_t idx : fv.packet_indices) pending.erase(idx);
            }
        }
    };

    RawFrame frame;
    while (queue.pop(frame)) {
        ++sum.packets;
        ParseResult pr = parse_packet(frame.data, frame.link_type, frame.ts_us);
        if (pr.status == ParseStatus::ok) {
            ++sum.admitted;
            uint64_t idx = index++;
            pending.emplace(idx, StoredPacket{std::move(frame)});
            handle_finalized(table.ingest(pr.record, idx));
        } else if (pr.status == ParseStatus::skip) {
            ++sum.skipped;
        } else {
            ++sum.malformed;
        }
    }
    reader.join();
    if (reader_error) std::rethrow_exception(reader_error);

    handle_finalized(table.flush());
    chunks.close();
    sum.chunk_paths = chunks.chunk_paths();

    // malicious pcap in global timestamp order
    std::stable_sort(malicious_frames.begin(), malicious_frames.end(),
                     [](const RawFrame& a, const RawFrame& b) { return a.ts_us < b.ts_us; });
    {
        PcapWriter mal(out_dir + "/malicious.pcap", source.link_type());
        for (const auto& fr : malicious_frames) mal.write(fr);
    }
    alert_log.flush();
    if (!alert_log) throw std::runtime_error("detect: alert log write failure");
    return sum;
}

}  // namespace botdet
