/* pipeline.hpp
 *
 * The offline dataset/training path and the real-time capture +
 * classification path behind the CLI: extract, rank, train, eval,
 * detect. Detection runs two stages over a bounded frame queue:
 * a reader that rotates raw chunks, and a classifier that owns the
 * flow table and writes the alert log plus the malicious-only pcap.
 */
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "botdet/brann.hpp"
#include "botdet/dataset.hpp"
#include "botdet/flow_meter.hpp"
#include "botdet/pcap_io.hpp"
#include "botdet/stats.hpp"

namespace botdet {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DetectionRecord {
    FlowKey key;
    int64_t first_ts_us = 0;
    int64_t last_ts_us = 0;
    double score = 0.0;
    int label = 0;
    std::string model_id;
    std::vector<uint64_t> packet_indices;
};

// Rotates classic-pcap chunk files; no chunk exceeds the byte limit by
// more than one packet record.
class ChunkWriter {
public:
    ChunkWriter(std::string dir, int link_type, uint64_t chunk_bytes = 200'000'000);

    void write(const RawFrame& frame);
    void close();
    uint64_t packets_written() const { return packets_; }
    const std::vector<std::string>& chunk_paths() const { return paths_; }

private:
    void rotate();

    std::string dir_;
    int link_type_;
    uint64_t limit_;
    PcapWriter writer_;
    uint64_t current_packets_ = 0;
    uint64_t packets_ = 0;
    int counter_ = 0;
    std::vector<std::string> paths_;
};

struct LabeledInput {
    std::string path;
    int label = 0;
};

struct ExtractSummary {
    size_t files = 0;
    uint64_t packets = 0;
    uint64_t admitted = 0;
    uint64_t skipped = 0;
    uint64_t malformed = 0;
    size_t flows = 0;
};

// pcaps -> labeled CSV (and optional ARFF)
ExtractSummary cmd_extract(const std::vector<LabeledInput>& inputs, const MeterConfig& meter,
                           const std::string& csv_path, const std::string& arff_path = "");

struct RankOutput {
    RankedFeatures ranked;
};

RankOutput cmd_rank(const std::string& csv_path, size_t top_k,
                    const std::string& out_path = "");

struct TrainOutput {
    NetworkModel model;
    std::string model_id;
    TrainingReport report;
    HiddenSweep sweep;
    RankedFeatures ranked;
    EvalReport eval;
};

TrainOutput cmd_train(const std::string& csv_path, const TrainingConfig& cfg, size_t top_k,
                      double threshold, const std::string& out_dir);

EvalReport cmd_eval(const std::string& model_path, const std::string& csv_path,
                    double threshold, const std::string& out_dir);

struct DetectConfig {
    MeterConfig meter;
    double threshold = 0.5;
    uint64_t chunk_bytes = 200'000'000;
    int64_t early_classify_us = 120'000'000;  // classify still-open flows past this age
    size_t queue_capacity = 4096;
};

struct DetectSummary {
    uint64_t packets = 0;
    uint64_t admitted = 0;
    uint64_t skipped = 0;
    uint64_t malformed = 0;
    uint64_t dropped = 0;  // live-source backpressure drops
    size_t flows = 0;
    size_t malicious_flows = 0;
    uint64_t malicious_packets = 0;
    std::vector<DetectionRecord> detections;
    std::vector<std::string> chunk_paths;
};

DetectSummary cmd_detect(PacketSource& source, const NetworkModel& model,
                         const std::string& model_id, const DetectConfig& cfg,
                         const std::string& out_dir);

std::string format_alert_line(const DetectionRecord& rec);
std::string iso8601_us(int64_t ts_us);

}  // namespace botdet
