#include "botdet/pcap_io.hpp"

#include <cstring>

namespace botdet {

namespace {

constexpr uint32_t kMagicNative = 0xa1b2c3d4;
constexpr uint32_t kMagicSwapped = 0xd4c3b2a1;

uint32_t bswap32(uint32_t v) {
    return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
}


void put32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

}  // namespace

PcapReader::PcapReader(const std::string& path) {
    f_ = std::fopen(path.c_str(), "rb");
    if (!f_) throw pcap_error("cannot open pcap file: " + path);
    read_global_header();
}

PcapReader::PcapReader(FILE* stream, bool live) : f_(stream), live_(live) {
    if (!f_) throw pcap_error("null pcap stream");
    read_global_header();
}

PcapReader::~PcapReader() {
    if (f_) std::fclose(f_);
}

void PcapReader::read_global_header() {
    uint8_t hdr[24];
    if (std::fread(hdr, 1, 24, f_) != 24) throw pcap_bad_magic("pcap: file shorter than global header");
    uint32_t magic;
    std::memcpy(&magic, hdr, 4);
    if (magic == kMagicNative) {
        swapped_ = false;
    } else if (magic == kMagicSwapped) {
        swapped_ = true;
    } else {
        throw pcap_bad_magic("pcap: unrecognized magic number");
    }
    uint32_t network;
    std::memcpy(&snaplen_, hdr + 16, 4);
    std::memcpy(&network, hdr + 20, 4);
    if (swapped_) {
        snaplen_ = bswap32(snaplen_);
        network = bswap32(network);
    }
    link_type_ = static_cast<int>(network);
}

bool PcapReader::next(RawFrame& out) {
    uint8_t rh[16];
    size_t got = std::fread(rh, 1, 16, f_);
    if (got == 0) return false;
    if (got != 16) throw pcap_truncated_record("pcap: truncated record header");

    uint32_t ts_sec, ts_usec, incl_len, orig_len;
    std::memcpy(&ts_sec, rh, 4);
    std::memcpy(&ts_usec, rh + 4, 4);
    std::memcpy(&incl_len, rh + 8, 4);
    std::memcpy(&orig_len, rh + 12, 4);
    if (swapped_) {
        ts_sec = bswap32(ts_sec);
        ts_usec = bswap32(ts_usec);
        incl_len = bswap32(incl_len);
        orig_len = bswap32(orig_len);
    }
    if (incl_len > 0x7fffffff) throw pcap_error("pcap: implausible record length");

    out.data.resize(incl_len);
    if (incl_len > 0 && std::fread(out.data.data(), 1, incl_len, f_) != incl_len)
        throw pcap_truncated_record("pcap: truncated record body");
    out.orig_len = orig_len;
    out.ts_us = static_cast<int64_t>(ts_sec) * 1000000 + ts_usec;
    out.link_type = link_type_;
    return true;
}

PcapWriter::PcapWriter(const std::string& path, int link_type, uint32_t snaplen) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw pcap_error("cannot create pcap file: " + path);
    std::vector<uint8_t> hdr;
    hdr.reserve(24);
    put32(hdr, kMagicNative);
    hdr.push_back(2);
    hdr.push_back(0);  // version 2.4
    hdr.push_back(4);
    hdr.push_back(0);
    put32(hdr, 0);  // thiszone
    put32(hdr, 0);  // sigfigs
    put32(hdr, snaplen);
    put32(hdr, static_cast<uint32_t>(link_type));
    if (std::fwrite(hdr.data(), 1, hdr.size(), f_) != hdr.size())
        throw pcap_error("pcap: short write on global header");
    bytes_ = kGlobalHeaderBytes;
}

PcapWriter::~PcapWriter() {
    close();
}

PcapWriter::PcapWriter(PcapWriter&& other) noexcept : f_(other.f_), bytes_(other.bytes_) {
    other.f_ = nullptr;
    other.bytes_ = 0;
}

PcapWriter& PcapWriter::operator=(PcapWriter&& other) noexcept {
    if (this != &other) {
        close();
        f_ = other.f_;
        bytes_ = other.bytes_;
        other.f_ = nullptr;
        other.bytes_ = 0;
    }
    return *this;
}

void PcapWriter::write(const RawFrame& frame) {
    if (!f_) throw pcap_error("pcap: write on closed file");
    std::vector<uint8_t> rh;
    rh.reserve(16);
    put32(rh, static_cast<uint32_t>(frame.ts_us / 1000000));
    put32(rh, static_cast<uint32_t>(frame.ts_us % 1000000));
    put32(rh, static_cast<uint32_t>(frame.data.size()));
    put32(rh, frame.orig_len ? frame.orig_len : static_cast<uint32_t>(frame.data.size()));
    if (std::fwrite(rh.data(), 1, 16, f_) != 16 ||
        (!frame.data.empty() &&
         std::fwrite(frame.data.data(), 1, frame.data.size(), f_) != frame.data.size()))
        throw pcap_error("pcap: short write on record");
    bytes_ += kRecordHeaderBytes + frame.data.size();
}

void PcapWriter::flush() {
    if (f_) std::fflush(f_);
}

void PcapWriter::close() {
    if (f_) {
        std::fclose(f_);
        f_ = nullptr;
    }
}

}  // namespace botdet
