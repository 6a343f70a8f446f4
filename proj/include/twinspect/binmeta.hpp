#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <chrono>

#include "twinspect/bytes.hpp"

namespace twinspect {

struct StringsHit {
    uint64_t offset = 0;
    std::string text; // printable ASCII run
    size_t length() const noexcept { return text.size(); }
};

struct StringsOptions {
    size_t min_len = 4;
    // The strict printable set is [0x20, 0x7E]; widening pulls tab in the
    // way GNU strings does.
    bool include_tab = false;
};

struct BuildBanner {
    std::string version;      // e.g. "5.15.108-18907-gba143be42d3a-dirty"
    std::string git_hash;     // from the -g<hash> version suffix
    bool dirty = false;       // version ends in "-dirty"
    std::string builder_user; // user in (user@host)
    std::string build_host;   // host in (user@host)
    int build_number = 0;     // the #N counter
    std::optional<int64_t> timestamp; // seconds since epoch, UTC
    std::string timestamp_text;       // ISO-8601 rendering when parsed
    std::string raw;                  // full matched text
    std::string parse_warning;        // set when the timestamp did not parse
};

struct BannerDelta {
    int64_t seconds = 0; // b minus a
    std::map<std::string, bool> fields_equal;
};

struct ByteDiffRegion {
    uint64_t offset = 0;
    uint64_t length = 0;
    std::vector<uint8_t> left_excerpt;  // up to 16 bytes
    std::vector<uint8_t> right_excerpt; // up to 16 bytes
};

struct ByteDiffSummary {
    uint64_t differing_bytes = 0;
    size_t region_count = 0;
    bool size_equal = true;
};

struct ByteDiff {
    std::vector<ByteDiffRegion> regions;
    ByteDiffSummary summary;
};

inline std::string hex_of_byte(uint8_t b) {
    static constexpr char digits[] = "0123456789abcdef";
    return std::string{digits[b >> 4], digits[b & 0x0F]};
}

namespace detail {

inline bool strings_printable(uint8_t b, bool include_tab) {
    return (b >= 0x20 && b <= 0x7E) || (include_tab && b == 0x09);
}

} // namespace detail

// Maximal printable-ASCII runs of at least min_len characters, in offset
// order. Scans in bounded windows with run carry-over so hits spanning a
// window boundary are never split.
inline std::vector<StringsHit> extract_strings(const ByteSource& blob,
                                               const StringsOptions& opts = {}) {
    if (opts.min_len < 1)
        throw std::invalid_argument("min_len must be at least 1");
    std::vector<StringsHit> hits;
    uint64_t run_start = 0;
    std::string run;
    auto flush = [&]() {
        if (run.size() >= opts.min_len)
            hits.push_back({run_start, std::move(run)});
        run.clear();
    };
    uint64_t pos = 0;
    for_each_chunk(blob, 0, blob.size(), [&](std::span<const uint8_t> chunk) {
        for (uint8_t b : chunk) {
            if (detail::strings_printable(b, opts.include_tab)) {
                if (run.empty())
                    run_start = pos;
                run.push_back(static_cast<char>(b));
            } else {
                flush();
            }
            ++pos;
        }
    });
    flush();
    return hits;
}

inline std::vector<StringsHit> extract_strings(std::span<const uint8_t> blob,
                                               const StringsOptions& opts = {}) {
    // Cheap adapter; keeps one scanning implementation.
    MemorySource src(std::vector<uint8_t>(blob.begin(), blob.end()));
    return extract_strings(static_cast<const ByteSource&>(src), opts);
}

namespace detail {

inline int month_number(const std::string& name) {
    static const char* names[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                  "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    for (int i = 0; i < 12; ++i)
        if (name == names[i])
            return i + 1;
    return 0;
}

inline int64_t civil_to_epoch(int year, int month, int day, int hour, int minute, int second) {
    using namespace std::chrono;
    sys_days date = sys_days(std::chrono::year{year} / month / day);
    return duration_cast<seconds>(date.time_since_epoch()).count() + hour * 3600 +
           minute * 60 + second;
}

inline std::string iso8601_utc(int64_t epoch) {
    using namespace std::chrono;
    sys_seconds tp{seconds{epoch}};
    sys_days date = floor<days>(tp);
    year_month_day ymd{date};
    int64_t rem = (tp - date).count();
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ",
                  int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                  static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

// Accepts the two timestamp shapes seen in kernel build banners:
//   "Wed Nov 15 07:25:36 UTC 2023"
//   "Wed, 7 Feb 2024 21:32:19 +0000"
inline std::optional<int64_t> parse_banner_timestamp(const std::string& text,
                                                     std::string* matched) {
    static const std::regex asctime_re(
        R"((Sun|Mon|Tue|Wed|Thu|Fri|Sat) +(Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) +(\d{1,2}) +(\d{2}):(\d{2}):(\d{2}) +(UTC|GMT) +(\d{4}))");
    static const std::regex rfc2822_re(
        R"((Sun|Mon|Tue|Wed|Thu|Fri|Sat), +(\d{1,2}) +(Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) +(\d{4}) +(\d{2}):(\d{2}):(\d{2}) +([+-]\d{4}))");
    std::smatch m;
    if (std::regex_search(text, m, asctime_re)) {
        if (matched)
            *matched = m[0];
        return civil_to_epoch(std::stoi(m[8]), month_number(m[2]), std::stoi(m[3]),
                              std::stoi(m[4]), std::stoi(m[5]), std::stoi(m[6]));
    }
    if (std::regex_search(text, m, rfc2822_re)) {
        if (matched)
            *matched = m[0];
        int64_t local = civil_to_epoch(std::stoi(m[4]), month_number(m[3]), std::stoi(m[2]),
                                       std::stoi(m[5]), std::stoi(m[6]), std::stoi(m[7]));
        std::string zone = m[8];
        int sign = zone[0] == '-' ? -1 : 1;
        int zh = std::stoi(zone.substr(1, 2));
        int zm = std::stoi(zone.substr(3, 2));
        return local - sign * (zh * 3600 + zm * 60);
    }
    return std::nullopt;
}

} // namespace detail

// Recognizes Linux build banners anchored on "(user@host) #N"; the version
// is the last token before the parenthesis.
inline std::vector<BuildBanner> find_build_banners(const std::vector<StringsHit>& hits) {
    static const std::regex anchor_re(
        R"(\(([A-Za-z0-9._+-]+)@([A-Za-z0-9._+-]+)\) *#(\d+))");
    std::vector<BuildBanner> banners;
    for (const auto& hit : hits) {
        auto begin = std::sregex_iterator(hit.text.begin(), hit.text.end(), anchor_re);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const std::smatch& m = *it;
            BuildBanner b;
            b.builder_user = m[1];
            b.build_host = m[2];
            b.build_number = std::stoi(m[3]);

            std::string before = hit.text.substr(0, static_cast<size_t>(m.position(0)));
            size_t ver_end = before.find_last_not_of(' ');
            size_t ver_begin = 0;
            if (ver_end == std::string::npos) {
                before.clear();
            } else {
                before.resize(ver_end + 1);
                size_t space = before.find_last_of(' ');
                ver_begin = space == std::string::npos ? 0 : space + 1;
                b.version = before.substr(ver_begin);
            }
            b.dirty = b.version.size() >= 6 &&
                      b.version.compare(b.version.size() - 6, 6, "-dirty") == 0;
            std::smatch gm;
            static const std::regex git_re(R"(-g([0-9a-f]{7,40}))");
            if (std::regex_search(b.version, gm, git_re))
                b.git_hash = gm[1];

            std::string tail = hit.text.substr(static_cast<size_t>(m.position(0)) + m.length(0));
            std::string matched;
            if (auto epoch = detail::parse_banner_timestamp(tail, &matched)) {
                b.timestamp = *epoch;
                b.timestamp_text = detail::iso8601_utc(*epoch);
                size_t end = hit.text.find(matched, static_cast<size_t>(m.position(0)));
                b.raw = hit.text.substr(ver_begin, end + matched.size() - ver_begin);
            } else {
                b.parse_warning = "timestamp not recognized";
                b.raw = hit.text.substr(ver_begin);
            }
            banners.push_back(std::move(b));
        }
    }
    return banners;
}

// Signed build-time difference (b minus a) plus a per-field equality map.
inline BannerDelta banner_delta(const BuildBanner& a, const BuildBanner& b) {
    if (!a.timestamp || !b.timestamp)
        throw std::invalid_argument("banner_delta: missing timestamp");
    BannerDelta d;
    d.seconds = *b.timestamp - *a.timestamp;
    d.fields_equal["version"] = a.version == b.version;
    d.fields_equal["git_hash"] = a.git_hash == b.git_hash;
    d.fields_equal["builder_user"] = a.builder_user == b.builder_user;
    d.fields_equal["build_host"] = a.build_host == b.build_host;
    d.fields_equal["build_number"] = a.build_number == b.build_number;
    return d;
}

namespace detail {

class HexdumpWriter {
public:
    HexdumpWriter(std::ostream& out, uint64_t base_offset)
        : out_(out), base_(base_offset) {}

    void feed(std::span<const uint8_t> data) {
        for (uint8_t b : data) {
            group_[fill_++] = b;
            if (fill_ == 16)
                emit_group();
        }
    }

    void finish() {
        if (fill_ > 0)
            emit_group();
        if (total_ > 0) {
            char buf[24];
            std::snprintf(buf, sizeof buf, "%08" PRIx64, base_ + total_);
            out_ << buf << '\n';
        }
    }

private:
    void emit_group() {
        size_t n = fill_;
        bool full = n == 16;
        if (full && have_prev_ && std::equal(group_, group_ + 16, prev_)) {
            if (!squeezing_) {
                out_ << "*\n";
                squeezing_ = true;
            }
        } else {
            squeezing_ = false;
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08" PRIx64, base_ + total_);
            out_ << buf << ' ' << ' ';
            for (size_t i = 0; i < 16; ++i) {
                if (i == 8)
                    out_ << ' ';
                if (i < n) {
                    out_ << hex_of_byte(group_[i]);
                } else {
                    out_ << "  ";
                }
                out_ << ' ';
            }
            out_ << ' ' << '|';
            for (size_t i = 0; i < n; ++i) {
                uint8_t b = group_[i];
                out_ << (b >= 0x20 && b <= 0x7E ? static_cast<char>(b) : '.');
            }
            out_ << "|\n";
        }
        if (full) {
            std::copy(group_, group_ + 16, prev_);
            have_prev_ = true;
        }
        total_ += n;
        fill_ = 0;
    }

    std::ostream& out_;
    uint64_t base_;
    uint64_t total_ = 0;
    uint8_t group_[16]{};
    uint8_t prev_[16]{};
    size_t fill_ = 0;
    bool have_prev_ = false;
    bool squeezing_ = false;
};

} // namespace detail

// Canonical "-C" rendering: offset, sixteen hex bytes split into two
// halves, printable gutter, repeated lines squeezed to '*', and a final
// total-offset line. Empty input renders as empty text.
inline void hexdump_stream(const ByteSource& blob, std::ostream& out,
                           uint64_t base_offset = 0) {
    detail::HexdumpWriter writer(out, base_offset);
    for_each_chunk(blob, 0, blob.size(),
                   [&](std::span<const uint8_t> chunk) { writer.feed(chunk); });
    writer.finish();
}

inline std::string hexdump(std::span<const uint8_t> blob, uint64_t base_offset = 0) {
    std::ostringstream out;
    detail::HexdumpWriter writer(out, base_offset);
    writer.feed(blob);
    writer.finish();
    return out.str();
}

inline std::string hexdump(std::string_view blob, uint64_t base_offset = 0) {
    return hexdump(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(blob.data()),
                                            blob.size()),
                   base_offset);
}

// Maximal differing byte regions over the common prefix, plus one trailing
// region when lengths differ. Streams both inputs; excerpts are re-read at
// the end, capped at 16 bytes per side.
inline ByteDiff diff_bytes(const ByteSource& a, const ByteSource& b) {
    ByteDiff diff;
    diff.summary.size_equal = a.size() == b.size();
    uint64_t common = std::min(a.size(), b.size());

    std::optional<uint64_t> open_start;
    uint64_t open_len = 0;
    auto close_region = [&]() {
        if (open_start) {
            diff.regions.push_back({*open_start, open_len, {}, {}});
            open_start.reset();
            open_len = 0;
        }
    };

    constexpr size_t kChunk = 1 << 20;
    std::vector<uint8_t> buf_a(kChunk), buf_b(kChunk);
    uint64_t pos = 0;
    while (pos < common) {
        size_t want = static_cast<size_t>(std::min<uint64_t>(kChunk, common - pos));
        a.read_exact(pos, std::span<uint8_t>(buf_a.data(), want));
        b.read_exact(pos, std::span<uint8_t>(buf_b.data(), want));
        for (size_t i = 0; i < want; ++i) {
            if (buf_a[i] != buf_b[i]) {
                if (!open_start)
                    open_start = pos + i;
                ++open_len;
            } else {
                close_region();
            }
        }
        pos += want;
    }

    if (!diff.summary.size_equal) {
        uint64_t tail = std::max(a.size(), b.size()) - common;
        if (open_start && *open_start + open_len == common) {
            open_len += tail; // contiguous with the prefix region
            close_region();
        } else {
            close_region();
            diff.regions.push_back({common, tail, {}, {}});
        }
    } else {
        close_region();
    }

    for (auto& region : diff.regions) {
        auto excerpt = [&](const ByteSource& src) {
            std::vector<uint8_t> out;
            if (region.offset < src.size()) {
                size_t n = static_cast<size_t>(
                    std::min<uint64_t>({16, region.length, src.size() - region.offset}));
                out = src.read_range(region.offset, n);
            }
            return out;
        };
        region.left_excerpt = excerpt(a);
        region.right_excerpt = excerpt(b);
        diff.summary.differing_bytes += region.length;
    }
    diff.summary.region_count = diff.regions.size();
    return diff;
}

inline ByteDiff diff_bytes(std::span<const uint8_t> a, std::span<const uint8_t> b) {
    MemorySource sa(std::vector<uint8_t>(a.begin(), a.end()));
    MemorySource sb(std::vector<uint8_t>(b.begin(), b.end()));
    return diff_bytes(static_cast<const ByteSource&>(sa), static_cast<const ByteSource&>(sb));
}

} // namespace twinspect
