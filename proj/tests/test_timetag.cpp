#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "biphoton/timetag.hpp"
#include "support/helpers.hpp"

using namespace biphoton;
using testsupport::error_code_of;
using testsupport::random_dataset;

namespace {

std::string to_bytes(const TagDataset& ds) {
    std::ostringstream out(std::ios::binary);
    write_dataset(ds, out);
    return out.str();
}

TagDataset from_bytes(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    return read_dataset(in);
}

}  // namespace

TEST_CASE("header-only file is exactly 40 bytes") {
    TagDataset ds;
    ds.trial_count = 1;
    const std::string bytes = to_bytes(ds);
    REQUIRE(bytes.size() == 40);
    REQUIRE(bytes.substr(0, 4) == "TTAG");
}

TEST_CASE("one record adds 13 packed bytes") {
    TagDataset ds;
    ds.trial_count = 2;
    ds.records.push_back(TimeTagRecord{1, Channel::d2a, 12345});
    REQUIRE(to_bytes(ds).size() == 40 + 13);
}

TEST_CASE("round-trip is exact for random datasets") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 100; ++i) {
        const TagDataset ds = random_dataset(rng, 500, true);
        const std::string bytes = to_bytes(ds);
        const TagDataset back = from_bytes(bytes);
        REQUIRE(back == ds);
        REQUIRE(to_bytes(back) == bytes);
    }
}

TEST_CASE("two-record file reads in stored order") {
    TagDataset ds;
    ds.trial_count = 3;
    ds.records = {TimeTagRecord{0, Channel::d1b, 7}, TimeTagRecord{2, Channel::d1a, 3}};
    const TagDataset back = from_bytes(to_bytes(ds));
    REQUIRE(back.records.size() == 2);
    CHECK(back.records[0] == ds.records[0]);
    CHECK(back.records[1] == ds.records[1]);
}

TEST_CASE("malformed streams are rejected with distinct categories") {
    TagDataset ds;
    ds.trial_count = 2;
    ds.records = {TimeTagRecord{0, Channel::d1a, 5}, TimeTagRecord{1, Channel::d2b, 9}};
    const std::string good = to_bytes(ds);

    SECTION("bad magic") {
        std::string bytes = good;
        bytes[0] = 'X';
        CHECK(error_code_of([&] { from_bytes(bytes); }) == errc::bad_magic);
    }
    SECTION("unsupported version") {
        std::string bytes = good;
        bytes[4] = 2;
        CHECK(error_code_of([&] { from_bytes(bytes); }) == errc::unsupported_version);
    }
    SECTION("truncated header") {
        CHECK(error_code_of([&] { from_bytes(good.substr(0, 20)); }) == errc::truncated_file);
    }
    SECTION("truncated record") {
        CHECK(error_code_of([&] { from_bytes(good.substr(0, good.size() - 5)); }) ==
              errc::truncated_file);
    }
    SECTION("bad channel byte") {
        std::string bytes = good;
        bytes[40 + 4] = 7;
        CHECK(error_code_of([&] { from_bytes(bytes); }) == errc::bad_channel);
    }
    SECTION("time beyond trial length") {
        std::string bytes = good;
        bytes[40 + 5] = char(0xff);
        bytes[40 + 6] = char(0xff);
        bytes[40 + 7] = char(0xff);
        CHECK(error_code_of([&] { from_bytes(bytes); }) == errc::out_of_range_record);
    }
    SECTION("trial beyond trial count") {
        std::string bytes = good;
        bytes[40 + 13] = 9;  // second record's trial index
        CHECK(error_code_of([&] { from_bytes(bytes); }) == errc::out_of_range_record);
    }
    SECTION("unsorted records") {
        std::string bytes = good;
        // Swap the two packed records.
        const std::string r0 = bytes.substr(40, 13);
        const std::string r1 = bytes.substr(53, 13);
        bytes.replace(40, 13, r1);
        bytes.replace(53, 13, r0);
        CHECK(error_code_of([&] { from_bytes(bytes); }) == errc::unsorted_records);
    }
    SECTION("duplicate records") {
        TagDataset dup = ds;
        dup.records[1] = dup.records[0];
        std::string bytes = good;
        bytes.replace(53, 13, bytes.substr(40, 13));
        CHECK(error_code_of([&] { from_bytes(bytes); }) == errc::duplicate_record);
    }
    SECTION("trailing garbage after metadata") {
        TagDataset with_meta = ds;
        with_meta.metadata["k"] = "v";
        std::string bytes = to_bytes(with_meta) + "junk";
        CHECK(error_code_of([&] { from_bytes(bytes); }) == errc::bad_metadata);
    }
    SECTION("writer refuses invariant violations") {
        TagDataset bad = ds;
        std::swap(bad.records[0], bad.records[1]);
        CHECK(error_code_of([&] { to_bytes(bad); }) == errc::unsorted_records);

        TagDataset out_of_range = ds;
        out_of_range.records[0].t = out_of_range.trial_length_units;
        CHECK(error_code_of([&] { to_bytes(out_of_range); }) == errc::out_of_range_record);
    }
}

TEST_CASE("merge re-indexes trials and conserves counts") {
    std::mt19937_64 rng(99);
    TagDataset a = random_dataset(rng, 300);
    TagDataset b = random_dataset(rng, 300);
    b.resolution_ps = a.resolution_ps;
    b.trial_length_units = a.trial_length_units;

    const TagDataset merged = merge_datasets(a, b);
    REQUIRE(merged.trial_count == a.trial_count + b.trial_count);
    REQUIRE(merged.records.size() == a.records.size() + b.records.size());
    REQUIRE_NOTHROW(validate_dataset(merged));

    // Per-channel tag counts survive the merge.
    for (Channel c : all_channels) {
        auto count = [&](const TagDataset& d) {
            std::size_t n = 0;
            for (const auto& r : d.records) n += r.channel == c;
            return n;
        };
        CHECK(count(merged) == count(a) + count(b));
    }

    // b's first trial becomes trial a.trial_count.
    if (!b.records.empty()) {
        const auto it = std::find_if(merged.records.begin(), merged.records.end(),
                                     [&](const TimeTagRecord& r) {
                                         return r.trial >= a.trial_count;
                                     });
        REQUIRE(it != merged.records.end());
        CHECK(it->trial == b.records.front().trial + a.trial_count);
    }
}

TEST_CASE("merge with an empty run only extends the trial count") {
    std::mt19937_64 rng(5);
    TagDataset a = random_dataset(rng, 200);
    TagDataset empty;
    empty.resolution_ps = a.resolution_ps;
    empty.trial_length_units = a.trial_length_units;
    empty.trial_count = 4;

    const TagDataset merged = merge_datasets(a, empty);
    CHECK(merged.trial_count == a.trial_count + 4);
    CHECK(merged.records == a.records);
}

TEST_CASE("merge rejects mismatched acquisition settings") {
    TagDataset a;
    TagDataset b;
    b.resolution_ps = a.resolution_ps * 2;
    CHECK(error_code_of([&] { merge_datasets(a, b); }) == errc::incompatible_datasets);

    TagDataset c;
    c.trial_length_units = a.trial_length_units + 1;
    CHECK(error_code_of([&] { merge_datasets(a, c); }) == errc::incompatible_datasets);
}

TEST_CASE("merge is associative up to trial relabeling") {
    std::mt19937_64 rng(17);
    TagDataset a = random_dataset(rng, 200);
    TagDataset b = random_dataset(rng, 200);
    TagDataset c = random_dataset(rng, 200);
    for (TagDataset* d : {&b, &c}) {
        d->resolution_ps = a.resolution_ps;
        d->trial_length_units = a.trial_length_units;
    }
    const TagDataset left = merge_datasets(merge_datasets(a, b), c);
    const TagDataset right = merge_datasets(a, merge_datasets(b, c));
    CHECK(left.trial_count == right.trial_count);
    CHECK(left.records == right.records);
}
