#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace twinspect {

class parse_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One /etc/passwd row: seven colon-separated fields.
struct PasswdEntry {
    std::string username;
    std::string password_marker; // normally "x"
    uint32_t uid = 0;
    uint32_t gid = 0;
    std::string comment; // GECOS
    std::string home;
    std::string shell;
    std::string raw_line;
    size_t line_number = 0; // 1-based when read from a file
};

// One /etc/shadow row: up to nine fields, absent day counts kept distinct
// from zero.
struct ShadowEntry {
    std::string username;
    std::string password_raw;
    std::optional<long> last_change_days;
    std::optional<long> min_days;
    std::optional<long> max_days;
    std::optional<long> warn_days;
    std::optional<long> inactive_days;
    std::optional<long> expire_days;
    std::optional<std::string> reserved; // 9th field, beyond the classic table
    int field_count = 0;
    std::string raw_line;
    size_t line_number = 0;
};

enum class PasswordVariant { empty, star, locked, hashed, other };

inline const char* to_string(PasswordVariant v) {
    switch (v) {
    case PasswordVariant::empty: return "empty";
    case PasswordVariant::star: return "star";
    case PasswordVariant::locked: return "locked";
    case PasswordVariant::hashed: return "hashed";
    default: return "other";
    }
}

// The decomposed "$id$salt$hash" password field.
struct PasswordField {
    PasswordVariant variant = PasswordVariant::other;
    std::string hash_id;
    std::string salt;
    std::string digest;
    std::string options; // optional "rounds=N" slot
    std::string raw;
};

enum class UidClass { root, system_daemon, user_daemon, standard };

inline const char* to_string(UidClass c) {
    switch (c) {
    case UidClass::root: return "root";
    case UidClass::system_daemon: return "system_daemon";
    case UidClass::user_daemon: return "user_daemon";
    default: return "standard";
    }
}

namespace detail {

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ':') {
            out.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline uint32_t parse_u32(std::string_view text, const char* what, size_t line_number) {
    uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(text.begin(), text.end(), value);
    if (ec != std::errc{} || ptr != text.end() || text.empty())
        throw parse_error("line " + std::to_string(line_number) + ": " + what +
                          " is not a decimal number: \"" + std::string(text) + "\"");
    return value;
}

inline std::optional<long> parse_day_field(std::string_view text, const char* what,
                                           size_t line_number) {
    if (text.empty())
        return std::nullopt;
    long value = 0;
    auto [ptr, ec] = std::from_chars(text.begin(), text.end(), value);
    if (ec != std::errc{} || ptr != text.end())
        throw parse_error("line " + std::to_string(line_number) + ": " + what +
                          " is not numeric: \"" + std::string(text) + "\"");
    return value;
}

} // namespace detail

inline PasswdEntry parse_passwd_line(std::string_view line, size_t line_number = 0) {
    auto fields = detail::split_fields(line);
    if (fields.size() != 7)
        throw parse_error("line " + std::to_string(line_number) +
                          ": expected 7 colon-separated fields, found " +
                          std::to_string(fields.size()));
    PasswdEntry e;
    e.username = fields[0];
    if (e.username.empty())
        throw parse_error("line " + std::to_string(line_number) + ": empty username");
    e.password_marker = fields[1];
    e.uid = detail::parse_u32(fields[2], "uid", line_number);
    e.gid = detail::parse_u32(fields[3], "gid", line_number);
    e.comment = fields[4];
    e.home = fields[5];
    e.shell = fields[6];
    e.raw_line = std::string(line);
    e.line_number = line_number;
    return e;
}

inline ShadowEntry parse_shadow_line(std::string_view line, size_t line_number = 0) {
    auto fields = detail::split_fields(line);
    if (fields.size() < 2 || fields.size() > 9)
        throw parse_error("line " + std::to_string(line_number) +
                          ": expected 2..9 colon-separated fields, found " +
                          std::to_string(fields.size()));
    ShadowEntry e;
    e.username = fields[0];
    if (e.username.empty())
        throw parse_error("line " + std::to_string(line_number) + ": empty username");
    e.password_raw = fields[1];
    e.field_count = static_cast<int>(fields.size());
    auto day = [&](size_t idx, const char* what) -> std::optional<long> {
        if (idx >= fields.size())
            return std::nullopt;
        return detail::parse_day_field(fields[idx], what, line_number);
    };
    e.last_change_days = day(2, "last password change");
    e.min_days = day(3, "minimum age");
    e.max_days = day(4, "maximum age");
    e.warn_days = day(5, "warning period");
    e.inactive_days = day(6, "inactivity period");
    e.expire_days = day(7, "expiration date");
    if (fields.size() == 9 && !fields[8].empty())
        e.reserved = fields[8];
    e.raw_line = std::string(line);
    e.line_number = line_number;
    return e;
}

inline std::string serialize(const PasswdEntry& e) {
    return e.username + ":" + e.password_marker + ":" + std::to_string(e.uid) + ":" +
           std::to_string(e.gid) + ":" + e.comment + ":" + e.home + ":" + e.shell;
}

inline std::string serialize(const ShadowEntry& e) {
    auto day = [](const std::optional<long>& v) {
        return v ? std::to_string(*v) : std::string{};
    };
    std::vector<std::string> fields = {e.username,
                                       e.password_raw,
                                       day(e.last_change_days),
                                       day(e.min_days),
                                       day(e.max_days),
                                       day(e.warn_days),
                                       day(e.inactive_days),
                                       day(e.expire_days),
                                       e.reserved.value_or("")};
    std::string out;
    for (int i = 0; i < e.field_count; ++i) {
        if (i)
            out += ':';
        out += fields[static_cast<size_t>(i)];
    }
    return out;
}

// Total over every password field value.
inline PasswordField decompose_password_field(std::string_view raw) {
    PasswordField f;
    f.raw = std::string(raw);
    if (raw.empty()) {
        f.variant = PasswordVariant::empty;
        return f;
    }
    if (raw == "*") {
        f.variant = PasswordVariant::star;
        return f;
    }
    if (raw.front() == '!') {
        f.variant = PasswordVariant::locked;
        return f;
    }
    if (raw.front() == '$') {
        std::vector<std::string> parts;
        size_t start = 1;
        for (size_t i = 1; i <= raw.size(); ++i) {
            if (i == raw.size() || raw[i] == '$') {
                parts.emplace_back(raw.substr(start, i - start));
                start = i + 1;
            }
        }
        if (parts.size() == 3 && !parts[0].empty() && !parts[1].empty() && !parts[2].empty()) {
            f.variant = PasswordVariant::hashed;
            f.hash_id = parts[0];
            f.salt = parts[1];
            f.digest = parts[2];
            return f;
        }
        if (parts.size() == 4 && !parts[0].empty() &&
            parts[1].rfind("rounds=", 0) == 0 && !parts[2].empty() && !parts[3].empty()) {
            f.variant = PasswordVariant::hashed;
            f.hash_id = parts[0];
            f.options = parts[1];
            f.salt = parts[2];
            f.digest = parts[3];
            return f;
        }
    }
    f.variant = PasswordVariant::other;
    return f;
}

inline std::string reconstruct(const PasswordField& f) {
    if (f.variant != PasswordVariant::hashed)
        return f.raw;
    std::string out = "$" + f.hash_id + "$";
    if (!f.options.empty())
        out += f.options + "$";
    out += f.salt + "$" + f.digest;
    return out;
}

inline UidClass classify_uid(uint32_t uid) {
    if (uid == 0)
        return UidClass::root;
    if (uid <= 99)
        return UidClass::system_daemon;
    if (uid <= 999)
        return UidClass::user_daemon;
    return UidClass::standard;
}

struct CivilDate {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
        return buf;
    }
};

// Day 0 is 1970-01-01 (shadow counts days, not seconds).
inline CivilDate days_to_date(long days) {
    if (days < 0)
        throw std::invalid_argument("days_to_date: negative day count");
    using namespace std::chrono;
    year_month_day ymd{sys_days{std::chrono::days{days}}};
    return {int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
}

struct FileDiagnostic {
    size_t line_number = 0;
    std::string message;
};

template <typename Entry>
struct ParsedCredFile {
    std::vector<Entry> entries;
    std::vector<size_t> skipped_lines; // comments and blanks, 1-based
    std::vector<FileDiagnostic> errors;
    std::vector<FileDiagnostic> diagnostics; // non-fatal notes (strict mode)
};

using ParsedPasswd = ParsedCredFile<PasswdEntry>;
using ParsedShadow = ParsedCredFile<ShadowEntry>;

namespace detail {

inline bool skippable_line(std::string_view line) {
    size_t i = line.find_first_not_of(" \t\r");
    return i == std::string_view::npos || line[i] == '#';
}

template <typename Entry, typename ParseFn>
ParsedCredFile<Entry> parse_cred_file(std::string_view text, ParseFn&& parse) {
    ParsedCredFile<Entry> out;
    size_t line_number = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(start, end - start);
        ++line_number;
        bool last = end == text.size();
        if (!(last && line.empty())) {
            if (skippable_line(line)) {
                out.skipped_lines.push_back(line_number);
            } else {
                try {
                    out.entries.push_back(parse(line, line_number));
                } catch (const parse_error& e) {
                    out.errors.push_back({line_number, e.what()});
                }
            }
        }
        if (last)
            break;
        start = end + 1;
    }
    return out;
}

} // namespace detail

inline ParsedPasswd parse_passwd(std::string_view text) {
    return detail::parse_cred_file<PasswdEntry>(text, [](std::string_view line, size_t n) {
        return parse_passwd_line(line, n);
    });
}

// strict adds a diagnostic for every row that does not have the standard
// nine fields (the shadow(5) shape); such rows still parse.
inline ParsedShadow parse_shadow(std::string_view text, bool strict = false) {
    auto out = detail::parse_cred_file<ShadowEntry>(text, [](std::string_view line, size_t n) {
        return parse_shadow_line(line, n);
    });
    if (strict) {
        for (const auto& e : out.entries) {
            if (e.field_count != 9)
                out.diagnostics.push_back(
                    {e.line_number, "nonstandard field count " +
                                        std::to_string(e.field_count) + " (expected 9) for \"" +
                                        e.username + "\""});
        }
    }
    return out;
}

} // namespace twinspect
