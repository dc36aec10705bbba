#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "biphoton/channel.hpp"
#include "biphoton/errors.hpp"

namespace biphoton {

/// One detection event: trial index, detector channel, and time within the
/// trial in digitizer units (dataset resolution).
struct TimeTagRecord {
    std::uint32_t trial = 0;
    Channel channel = Channel::d1a;
    std::uint64_t t = 0;

    friend bool operator==(const TimeTagRecord&, const TimeTagRecord&) = default;
};

/// Ordering key used by the stored format: (trial, t, channel).
inline bool record_less(const TimeTagRecord& a, const TimeTagRecord& b) {
    if (a.trial != b.trial) return a.trial < b.trial;
    if (a.t != b.t) return a.t < b.t;
    return a.channel < b.channel;
}

/// An acquisition run: per-trial time tags plus the header metadata needed to
/// interpret them. Immutable after load; safe for concurrent readers.
struct TagDataset {
    std::uint64_t resolution_ps = 100;
    std::uint64_t trial_length_units = 10'000'000;  // 1 ms at 100 ps
    std::uint64_t trial_count = 1;
    std::vector<TimeTagRecord> records;
    std::map<std::string, std::string> metadata;

    double resolution_s() const { return static_cast<double>(resolution_ps) * 1e-12; }
    double trial_length_s() const {
        return static_cast<double>(trial_length_units) * resolution_s();
    }

    friend bool operator==(const TagDataset&, const TagDataset&) = default;
};

/// Checks all stored-format invariants; throws on the first violation.
inline void validate_dataset(const TagDataset& d) {
    require(d.resolution_ps > 0, errc::invalid_dataset, "resolution must be positive");
    require(d.trial_length_units > 0, errc::invalid_dataset, "trial length must be positive");
    require(d.trial_count > 0, errc::invalid_dataset, "trial count must be positive");
    const TimeTagRecord* prev = nullptr;
    for (const auto& r : d.records) {
        require(static_cast<unsigned>(r.channel) < 4, errc::bad_channel,
                "record channel out of range");
        require(r.t < d.trial_length_units, errc::out_of_range_record,
                "record time " + std::to_string(r.t) + " exceeds trial length");
        require(r.trial < d.trial_count, errc::out_of_range_record,
                "record trial " + std::to_string(r.trial) + " exceeds trial count");
        if (prev != nullptr) {
            if (*prev == r) fail(errc::duplicate_record, "duplicate (trial, channel, t) record");
            require(record_less(*prev, r), errc::unsorted_records,
                    "records not sorted by (trial, t, channel)");
        }
        prev = &r;
    }
}

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace detail

inline constexpr char ttag_magic[4] = {'T', 'T', 'A', 'G'};
inline constexpr std::uint16_t ttag_version = 1;
inline constexpr std::size_t ttag_header_size = 40;
inline constexpr std::size_t ttag_record_size = 13;

/// Serializes a dataset in the TTAG binary format (little-endian):
///   header (40 B): "TTAG" | version u16 | reserved u16 | resolution_ps u64 |
///                  trial_length_units u64 | trial_count u64 | record_count u64
///   records (13 B each): trial u32 | channel u8 | t u64
///   optional metadata: u32 byte length + UTF-8 JSON object of strings
/// Returns the number of bytes written. Refuses to serialize datasets that
/// violate the stored-format invariants.
inline std::uint64_t write_dataset(const TagDataset& d, std::ostream& out) {
    validate_dataset(d);

    std::string buf;
    buf.reserve(ttag_header_size + ttag_record_size * d.records.size());
    buf.append(ttag_magic, 4);
    detail::put_u16(buf, ttag_version);
    detail::put_u16(buf, 0);
    detail::put_u64(buf, d.resolution_ps);
    detail::put_u64(buf, d.trial_length_units);
    detail::put_u64(buf, d.trial_count);
    detail::put_u64(buf, d.records.size());
    for (const auto& r : d.records) {
        detail::put_u32(buf, r.trial);
        buf.push_back(static_cast<char>(static_cast<std::uint8_t>(r.channel)));
        detail::put_u64(buf, r.t);
    }
    if (!d.metadata.empty()) {
        nlohmann::json j(d.metadata);
        const std::string meta = j.dump();
        require(meta.size() <= std::numeric_limits<std::uint32_t>::max(), errc::bad_metadata,
                "metadata block too large");
        detail::put_u32(buf, static_cast<std::uint32_t>(meta.size()));
        buf.append(meta);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    require(out.good(), errc::io_failure, "failed writing TTAG stream");
    return buf.size();
}

/// Parses and validates a TTAG stream. Malformed input is rejected, never
/// repaired: analysis correctness depends on the stored invariants.
inline TagDataset read_dataset(std::istream& in) {
    unsigned char header[ttag_header_size];
    in.read(reinterpret_cast<char*>(header), ttag_header_size);
    require(in.gcount() == static_cast<std::streamsize>(ttag_header_size), errc::truncated_file,
            "stream shorter than TTAG header");
    require(std::memcmp(header, ttag_magic, 4) == 0, errc::bad_magic, "not a TTAG stream");
    const std::uint16_t version = detail::get_u16(header + 4);
    require(version == ttag_version, errc::unsupported_version,
            "unsupported TTAG version " + std::to_string(version));

    TagDataset d;
    d.resolution_ps = detail::get_u64(header + 8);
    d.trial_length_units = detail::get_u64(header + 16);
    d.trial_count = detail::get_u64(header + 24);
    const std::uint64_t record_count = detail::get_u64(header + 32);
    require(d.resolution_ps > 0, errc::invalid_dataset, "header: resolution must be positive");
    require(d.trial_length_units > 0, errc::invalid_dataset,
            "header: trial length must be positive");
    require(d.trial_count > 0, errc::invalid_dataset, "header: trial count must be positive");

    d.records.reserve(record_count);
    TimeTagRecord prev;
    for (std::uint64_t i = 0; i < record_count; ++i) {
        unsigned char rec[ttag_record_size];
        in.read(reinterpret_cast<char*>(rec), ttag_record_size);
        require(in.gcount() == static_cast<std::streamsize>(ttag_record_size),
                errc::truncated_file, "truncated record " + std::to_string(i));
        TimeTagRecord r;
        r.trial = detail::get_u32(rec);
        require(rec[4] < 4, errc::bad_channel,
                "record " + std::to_string(i) + ": channel byte " + std::to_string(rec[4]));
        r.channel = static_cast<Channel>(rec[4]);
        r.t = detail::get_u64(rec + 5);
        require(r.t < d.trial_length_units, errc::out_of_range_record,
                "record " + std::to_string(i) + ": time exceeds trial length");
        require(r.trial < d.trial_count, errc::out_of_range_record,
                "record " + std::to_string(i) + ": trial exceeds trial count");
        if (i > 0) {
            if (prev == r)
                fail(errc::duplicate_record, "record " + std::to_string(i) + " duplicates previous");
            require(record_less(prev, r), errc::unsorted_records,
                    "record " + std::to_string(i) + " out of order");
        }
        prev = r;
        d.records.push_back(r);
    }

    // Optional metadata block.
    unsigned char len_buf[4];
    in.read(reinterpret_cast<char*>(len_buf), 4);
    const std::streamsize got = in.gcount();
    if (got == 0) return d;
    require(got == 4, errc::truncated_file, "truncated metadata length");
    const std::uint32_t meta_len = detail::get_u32(len_buf);
    std::string meta(meta_len, '\0');
    in.read(meta.data(), meta_len);
    require(in.gcount() == static_cast<std::streamsize>(meta_len), errc::truncated_file,
            "truncated metadata block");
    in.peek();
    require(in.eof(), errc::bad_metadata, "trailing bytes after metadata block");
    nlohmann::json j = nlohmann::json::parse(meta, nullptr, false);
    require(j.is_object(), errc::bad_metadata, "metadata is not a JSON object");
    for (const auto& [key, value] : j.items()) {
        require(value.is_string(), errc::bad_metadata, "metadata value for '" + key +
                                                           "' is not a string");
        d.metadata[key] = value.get<std::string>();
    }
    return d;
}

/// Concatenates two runs: b's trials are re-indexed to follow a's. Requires
/// identical resolution and trial length. Metadata keys merge left-biased.
inline TagDataset merge_datasets(const TagDataset& a, const TagDataset& b) {
    require(a.resolution_ps == b.resolution_ps, errc::incompatible_datasets,
            "resolution mismatch: " + std::to_string(a.resolution_ps) + " vs " +
                std::to_string(b.resolution_ps) + " ps");
    require(a.trial_length_units == b.trial_length_units, errc::incompatible_datasets,
            "trial length mismatch");
    require(a.trial_count + b.trial_count <= std::numeric_limits<std::uint32_t>::max(),
            errc::incompatible_datasets, "merged trial count exceeds format limit");

    TagDataset out;
    out.resolution_ps = a.resolution_ps;
    out.trial_length_units = a.trial_length_units;
    out.trial_count = a.trial_count + b.trial_count;
    out.records.reserve(a.records.size() + b.records.size());
    out.records = a.records;
    const auto offset = static_cast<std::uint32_t>(a.trial_count);
    for (TimeTagRecord r : b.records) {
        r.trial += offset;
        out.records.push_back(r);
    }
    out.metadata = a.metadata;
    out.metadata.insert(b.metadata.begin(), b.metadata.end());
    return out;
}

}  // namespace biphoton
