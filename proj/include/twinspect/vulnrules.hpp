#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "twinspect/credparse.hpp"

namespace twinspect {

enum class Severity { critical = 0, high = 1, medium = 2, info = 3 };

inline const char* to_string(Severity s) {
    switch (s) {
    case Severity::critical: return "critical";
    case Severity::high: return "high";
    case Severity::medium: return "medium";
    default: return "info";
    }
}

inline std::optional<Severity> severity_from_string(std::string_view s) {
    if (s == "critical") return Severity::critical;
    if (s == "high") return Severity::high;
    if (s == "medium") return Severity::medium;
    if (s == "info") return Severity::info;
    return std::nullopt;
}

struct Finding {
    std::string rule_id;
    std::vector<int> cwe_ids; // ascending
    Severity severity = Severity::info;
    std::string subject_file;
    size_t subject_line = 0;
    std::string subject_key; // username or directive
    std::string evidence;    // verbatim excerpt; multi-line when a second line is cited
    std::string recommendation;

    std::string subject() const {
        return subject_file + ":" + std::to_string(subject_line) + ":" + subject_key;
    }
};

struct RulePolicy {
    // Two readings of "*" exist: a wildcard permitting entry with any or
    // no password (observed on some console-login stacks), and the
    // conventional crypt reading where it matches nothing. Both are
    // exposed; the wildcard reading is the default.
    bool star_is_wildcard = true;
    uint32_t privileged_uid_threshold = 0; // uid <= threshold counts as privileged
    std::map<std::string, Severity> severity_overrides;

    bool operator==(const RulePolicy&) const = default;
};

inline std::string serialize(const RulePolicy& p) {
    std::string out;
    out += "privileged_uid_threshold=" + std::to_string(p.privileged_uid_threshold) + "\n";
    for (const auto& [rule, sev] : p.severity_overrides)
        out += "severity_override." + rule + "=" + to_string(sev) + "\n";
    out += std::string("star_is_wildcard=") + (p.star_is_wildcard ? "true" : "false") + "\n";
    return out;
}

inline RulePolicy parse_policy(std::string_view text) {
    RulePolicy p;
    size_t start = 0;
    size_t line_number = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(start, end - start);
        ++line_number;
        bool last = end == text.size();
        size_t ws = line.find_first_not_of(" \t\r");
        if (ws != std::string_view::npos && line[ws] != '#') {
            size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw parse_error("policy line " + std::to_string(line_number) +
                                  ": expected key=value");
            std::string key(line.substr(ws, eq - ws));
            std::string value(line.substr(eq + 1));
            while (!value.empty() && (value.back() == '\r' || value.back() == ' '))
                value.pop_back();
            if (key == "star_is_wildcard") {
                if (value != "true" && value != "false")
                    throw parse_error("policy line " + std::to_string(line_number) +
                                      ": star_is_wildcard must be true or false");
                p.star_is_wildcard = value == "true";
            } else if (key == "privileged_uid_threshold") {
                p.privileged_uid_threshold = detail::parse_u32(value, key.c_str(), line_number);
            } else if (key.rfind("severity_override.", 0) == 0) {
                std::string rule = key.substr(std::string("severity_override.").size());
                auto sev = severity_from_string(value);
                if (rule.empty() || !sev)
                    throw parse_error("policy line " + std::to_string(line_number) +
                                      ": bad severity override");
                p.severity_overrides[rule] = *sev;
            } else {
                throw parse_error("policy line " + std::to_string(line_number) +
                                  ": unknown key \"" + key + "\"");
            }
        }
        if (last)
            break;
        start = end + 1;
    }
    return p;
}

namespace detail {

inline void sort_findings(std::vector<Finding>& findings) {
    std::stable_sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
        if (a.severity != b.severity)
            return static_cast<int>(a.severity) < static_cast<int>(b.severity);
        if (a.subject() != b.subject())
            return a.subject() < b.subject();
        return a.rule_id < b.rule_id;
    });
}

inline Severity apply_override(const RulePolicy& policy, const std::string& rule_id,
                               Severity base) {
    auto it = policy.severity_overrides.find(rule_id);
    return it == policy.severity_overrides.end() ? base : it->second;
}

} // namespace detail

// Rule engine over parsed passwd/shadow rows. Pure: identical inputs and
// policy give identical ordered findings.
inline std::vector<Finding> audit_credentials(const std::vector<PasswdEntry>& passwd,
                                              const std::vector<ShadowEntry>& shadow,
                                              const RulePolicy& policy = {},
                                              const std::string& passwd_file = "etc/passwd",
                                              const std::string& shadow_file = "etc/shadow") {
    std::vector<Finding> findings;
    std::unordered_map<std::string, const PasswdEntry*> passwd_by_name;
    for (const auto& e : passwd)
        passwd_by_name.emplace(e.username, &e);
    std::unordered_map<std::string, const ShadowEntry*> shadow_by_name;
    for (const auto& e : shadow)
        shadow_by_name.emplace(e.username, &e);

    auto privileged = [&](const std::string& username) {
        auto it = passwd_by_name.find(username);
        return it != passwd_by_name.end() && it->second->uid <= policy.privileged_uid_threshold;
    };
    auto push = [&](Finding f) {
        f.severity = detail::apply_override(policy, f.rule_id, f.severity);
        findings.push_back(std::move(f));
    };

    for (const auto& e : shadow) {
        auto field = decompose_password_field(e.password_raw);
        bool is_root = privileged(e.username);
        if (field.variant == PasswordVariant::empty) {
            push({"SHADOW-EMPTY",
                  {258},
                  is_root ? Severity::critical : Severity::high,
                  shadow_file,
                  e.line_number,
                  e.username,
                  e.raw_line,
                  "set a password hash or lock the account (\"!\")"});
        } else if (field.variant == PasswordVariant::star) {
            if (policy.star_is_wildcard) {
                push({"SHADOW-STAR-WILDCARD",
                      {258, 1392, 1393},
                      is_root ? Severity::critical : Severity::high,
                      shadow_file,
                      e.line_number,
                      e.username,
                      e.raw_line,
                      "\"*\" permits console login with any or no password on this build; "
                      "set a password hash or lock the account (\"!\")"});
            } else {
                push({"SHADOW-STAR-LOCKED",
                      {},
                      Severity::info,
                      shadow_file,
                      e.line_number,
                      e.username,
                      e.raw_line,
                      "\"*\" read as locked by convention (crypt semantics); "
                      "no password login matches this field"});
            }
        }
        if (e.last_change_days && *e.last_change_days == 0) {
            push({"SHADOW-MUST-CHANGE",
                  {},
                  Severity::info,
                  shadow_file,
                  e.line_number,
                  e.username,
                  e.raw_line,
                  "last-change day 0: the user must give a new password upon login"});
        }
    }

    for (const auto& e : passwd) {
        if (e.password_marker.empty()) {
            push({"PASSWD-EMPTY",
                  {258},
                  e.uid <= policy.privileged_uid_threshold ? Severity::critical : Severity::high,
                  passwd_file,
                  e.line_number,
                  e.username,
                  e.raw_line,
                  "empty password field in passwd permits login without a password"});
        } else if (e.password_marker != "x") {
            push({"PASSWD-HASH-EXPOSED",
                  {260},
                  Severity::high,
                  passwd_file,
                  e.line_number,
                  e.username,
                  e.raw_line,
                  "password material stored in world-readable passwd; move it to shadow"});
        }
        if (!shadow_by_name.contains(e.username)) {
            push({"PASSWD-NO-SHADOW",
                  {522},
                  Severity::medium,
                  passwd_file,
                  e.line_number,
                  e.username,
                  e.raw_line,
                  "no shadow row for this account; authentication state is undefined"});
        }
        if (e.uid <= policy.privileged_uid_threshold && e.username != "root") {
            push({"UID0-ALIAS",
                  {266},
                  Severity::high,
                  passwd_file,
                  e.line_number,
                  e.username,
                  e.raw_line,
                  "additional account with a privileged uid; every such account is a "
                  "full-control login"});
        }
    }

    detail::sort_findings(findings);
    return findings;
}

struct SshdDirective {
    std::string key;   // as written
    std::string value; // first token after the key
    size_t line_number = 0;
    std::string raw_line;
};

// First-occurrence-wins extraction with case-insensitive keys. Unknown
// directives are kept too; callers pick what they need.
inline std::map<std::string, SshdDirective> extract_sshd_directives(std::string_view text) {
    std::map<std::string, SshdDirective> out;
    size_t start = 0;
    size_t line_number = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(start, end - start);
        ++line_number;
        bool last = end == text.size();

        std::string_view body = line;
        size_t ws = body.find_first_not_of(" \t\r");
        if (ws != std::string_view::npos && body[ws] != '#') {
            body = body.substr(ws);
            size_t split = body.find_first_of(" \t=");
            std::string key(body.substr(0, split));
            std::string value;
            if (split != std::string_view::npos) {
                size_t vstart = body.find_first_not_of(" \t=", split);
                if (vstart != std::string_view::npos) {
                    size_t vend = body.find_first_of(" \t\r", vstart);
                    value = std::string(body.substr(vstart, vend == std::string_view::npos
                                                                ? std::string_view::npos
                                                                : vend - vstart));
                }
            }
            std::string lowered = key;
            std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (!lowered.empty() && !out.contains(lowered))
                out.emplace(lowered, SshdDirective{key, value, line_number, std::string(line)});
        }
        if (last)
            break;
        start = end + 1;
    }
    return out;
}

inline std::vector<Finding> audit_sshd_config(std::string_view text,
                                              const RulePolicy& policy = {},
                                              const std::string& file_name =
                                                  "etc/ssh/sshd_config") {
    auto directives = extract_sshd_directives(text);
    auto lowered_value = [](const SshdDirective& d) {
        std::string v = d.value;
        std::transform(v.begin(), v.end(), v.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        return v;
    };

    std::vector<Finding> findings;
    auto push = [&](Finding f) {
        f.severity = detail::apply_override(policy, f.rule_id, f.severity);
        findings.push_back(std::move(f));
    };

    const SshdDirective* password_auth = nullptr;
    if (auto it = directives.find("passwordauthentication"); it != directives.end())
        password_auth = &it->second;

    if (auto it = directives.find("permitrootlogin");
        it != directives.end() && lowered_value(it->second) == "yes") {
        const auto& d = it->second;
        Severity sev = Severity::high;
        std::string evidence = d.raw_line;
        std::string recommendation = "disable root sign-in (PermitRootLogin no) or restrict it "
                                     "to keys (prohibit-password)";
        if (password_auth && lowered_value(*password_auth) == "no") {
            // Password logins are rejected outright, which contains the
            // exposure; one severity step down.
            sev = Severity::medium;
            evidence += "\n" + password_auth->raw_line;
            recommendation += "; PasswordAuthentication no at line " +
                              std::to_string(password_auth->line_number) +
                              " rejects password logins and limits the exposure";
        }
        push({"SSHD-ROOT-LOGIN", {284}, sev, file_name, d.line_number, d.key, evidence,
              recommendation});
    }

    if (auto it = directives.find("permitemptypasswords");
        it != directives.end() && lowered_value(it->second) == "yes") {
        const auto& d = it->second;
        push({"SSHD-EMPTY-PASSWORDS",
              {258},
              Severity::critical,
              file_name,
              d.line_number,
              d.key,
              d.raw_line,
              "never permit empty passwords over ssh (PermitEmptyPasswords no)"});
    }

    detail::sort_findings(findings);
    return findings;
}

} // namespace twinspect
