/* pcap_io.hpp
 *
 * Classic libpcap file reading/writing (magic 0xa1b2c3d4, microsecond
 * timestamps, both byte orders) and the capture-source abstraction the
 * detection pipeline consumes.
 */
#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace botdet {

struct RawFrame {
    std::vector<uint8_t> data;  // captured bytes (caplen)
    uint32_t orig_len = 0;      // original wire length
    int64_t ts_us = 0;
    int link_type = 1;
};

// Anything that yields captured frames in time order: a pcap file, a
// stream (stdin pipe), or a simulated live feed in tests.
class PacketSource {
public:
    virtual ~PacketSource() = default;
    // false on end of stream
    virtual bool next(RawFrame& out) = 0;
    virtual int link_type() const = 0;
    // live sources may drop on backpressure instead of blocking
    virtual bool is_live() const { return false; }
};

struct pcap_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct pcap_bad_magic : pcap_error {
    using pcap_error::pcap_error;
};
// raised after all complete records have been yielded
struct pcap_truncated_record : pcap_error {
    using pcap_error::pcap_error;
};

class PcapReader final : public PacketSource {
public:
    explicit PcapReader(const std::string& path);
    explicit PcapReader(FILE* stream, bool live = false);  // takes ownership
    ~PcapReader() override;

    PcapReader(const PcapReader&) = delete;
    PcapReader& operator=(const PcapReader&) = delete;

    bool next(RawFrame& out) override;  // throws pcap_truncated_record on a partial tail
    int link_type() const override { return link_type_; }
    bool is_live() const override { return live_; }

private:
    void read_global_header();

    FILE* f_ = nullptr;
    bool swapped_ = false;
    bool live_ = false;
    int link_type_ = 1;
    uint32_t snaplen_ = 0;
};

class PcapWriter {
public:
    PcapWriter() = default;
    PcapWriter(const std::string& path, int link_type, uint32_t snaplen = 262144);
    ~PcapWriter();

    PcapWriter(PcapWriter&&) noexcept;
    PcapWriter& operator=(PcapWriter&&) noexcept;
    PcapWriter(const PcapWriter&) = delete;
    PcapWriter& operator=(const PcapWriter&) = delete;

    void write(const RawFrame& frame);
    void flush();
    void close();
    bool is_open() const { return f_ != nullptr; }
    // bytes written so far, including the global header
    uint64_t bytes_written() const { return bytes_; }

    static constexpr uint64_t kGlobalHeaderBytes = 24;
    static constexpr uint64_t kRecordHeaderBytes = 16;

private:
    FILE* f_ = nullptr;
    uint64_t bytes_ = 0;
};

}  // namespace botdet
