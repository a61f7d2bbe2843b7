#pragma once

// Input types shared by every scoring and meta-evaluation routine: per-token
// likelihood dumps, human-annotated article/summary pairs and score tables.
// Everything is validated at ingestion so downstream code can trust the
// invariants documented on each type.

#include <harim/detail/text.hpp>
#include <harim/error.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace harim {

/// Log-probabilities in (0, kLogpTolerance] are float noise and clamp to 0.
inline constexpr double kLogpTolerance = 1e-9;

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Criterion { factuality, consistency, coherence, fluency, relevance };

inline constexpr Criterion kAllCriteria[] = {Criterion::factuality, Criterion::consistency,
                                             Criterion::coherence, Criterion::fluency,
                                             Criterion::relevance};

inline std::string_view to_string(Criterion c) {
    switch (c) {
        case Criterion::factuality: return "factuality";
        case Criterion::consistency: return "consistency";
        case Criterion::coherence: return "coherence";
        case Criterion::fluency: return "fluency";
        case Criterion::relevance: return "relevance";
    }
    return "?";
}

inline std::optional<Criterion> parse_criterion(std::string_view name) {
    for (auto c : kAllCriteria)
        if (to_string(c) == name) return c;
    return std::nullopt;
}

/// Valid closed range of an aggregated judgment: [0,1] for factuality,
/// the 1-5 Likert scale for the four SummEval criteria.
inline std::pair<double, double> judgment_range(Criterion c) {
    return c == Criterion::factuality ? std::pair{0.0, 1.0} : std::pair{1.0, 5.0};
}

enum class SummaryKind { abstractive, extractive, reference, unknown };

inline std::string_view to_string(SummaryKind k) {
    switch (k) {
        case SummaryKind::abstractive: return "abstractive";
        case SummaryKind::extractive: return "extractive";
        case SummaryKind::reference: return "reference";
        case SummaryKind::unknown: return "unknown";
    }
    return "?";
}

inline std::optional<SummaryKind> parse_kind(std::string_view name) {
    for (auto k : {SummaryKind::abstractive, SummaryKind::extractive, SummaryKind::reference,
                   SummaryKind::unknown})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

enum class Benchmark { frank, qags, summeval, generic };

inline std::string_view to_string(Benchmark b) {
    switch (b) {
        case Benchmark::frank: return "frank";
        case Benchmark::qags: return "qags";
        case Benchmark::summeval: return "summeval";
        case Benchmark::generic: return "generic";
    }
    return "?";
}

inline std::optional<Benchmark> parse_benchmark(std::string_view name) {
    for (auto b : {Benchmark::frank, Benchmark::qags, Benchmark::summeval, Benchmark::generic})
        if (to_string(b) == name) return b;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// LikelihoodRecord
// ---------------------------------------------------------------------------

/// Teacher-forced token log-likelihoods of one summary, once conditioned on
/// its article and once on an empty source. Natural logs; entropies in nats.
struct LikelihoodRecord {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<double> logp_s2s;
    std::vector<double> logp_lm;
    std::optional<std::vector<double>> entropy_s2s;
    std::optional<std::vector<double>> entropy_lm;

    std::size_t size() const noexcept { return tokens.size(); }
    bool has_entropy() const noexcept { return entropy_s2s.has_value() && entropy_lm.has_value(); }

    friend bool operator==(const LikelihoodRecord&, const LikelihoodRecord&) = default;
};

/// Checks the record invariants and clamps sub-tolerance positive log-probs to
/// zero. Throws ValidationError describing the first violation.
inline void validate(LikelihoodRecord& rec) {
    const auto fail = [&](const std::string& msg) {
        throw ValidationError("record '" + rec.id + "': " + msg);
    };
    if (rec.id.empty()) fail("empty id");
    const std::size_t len = rec.tokens.size();
    if (len == 0) fail("no tokens");
    const auto check_len = [&](std::size_t n, std::string_view name) {
        if (n != len)
            fail("length mismatch: " + std::string(name) + " has " + std::to_string(n) +
                 " values but tokens has " + std::to_string(len));
    };
    check_len(rec.logp_s2s.size(), "logp_s2s");
    check_len(rec.logp_lm.size(), "logp_lm");
    if (rec.entropy_s2s) check_len(rec.entropy_s2s->size(), "entropy_s2s");
    if (rec.entropy_lm) check_len(rec.entropy_lm->size(), "entropy_lm");

    const auto check_logp = [&](std::vector<double>& v, std::string_view name) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i]))
                fail(std::string(name) + "[" + std::to_string(i) + "] is not finite");
            if (v[i] > kLogpTolerance)
                fail(std::string(name) + "[" + std::to_string(i) + "] = " +
                     detail::format_double(v[i]) + " is a log-probability above 0");
            if (v[i] > 0.0) v[i] = 0.0;
        }
    };
    check_logp(rec.logp_s2s, "logp_s2s");
    check_logp(rec.logp_lm, "logp_lm");

    const auto check_entropy = [&](const std::optional<std::vector<double>>& v,
                                   std::string_view name) {
        if (!v) return;
        for (std::size_t i = 0; i < v->size(); ++i)
            if (!std::isfinite((*v)[i]) || (*v)[i] < 0.0)
                fail(std::string(name) + "[" + std::to_string(i) + "] must be a finite entropy >= 0");
    };
    check_entropy(rec.entropy_s2s, "entropy_s2s");
    check_entropy(rec.entropy_lm, "entropy_lm");
}

namespace detail {

inline std::vector<double> json_number_array(const nlohmann::json& j, std::string_view key) {
    if (!j.is_array()) throw ValidationError("'" + std::string(key) + "' must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number())
            throw ValidationError("'" + std::string(key) + "' must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline const nlohmann::json& require_key(const nlohmann::json& obj, std::string_view key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError("missing key '" + std::string(key) + "'");
    return *it;
}

inline std::string require_string(const nlohmann::json& obj, std::string_view key) {
    const auto& v = require_key(obj, key);
    if (!v.is_string()) throw ValidationError("'" + std::string(key) + "' must be a string");
    return v.get<std::string>();
}

inline nlohmann::json parse_object_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("line is not a JSON object");
    return j;
}

/// Runs `fn(line)` over every non-blank line, rethrowing validation failures
/// with "source:line:" prepended.
template <typename Fn>
void for_each_line(std::istream& in, const std::string& source, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        try {
            fn(line, lineno);
        } catch (const ValidationError& e) {
            if (e.line() != 0) throw;
            throw ValidationError(source, lineno, e.what());
        }
    }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    return in;
}

}  // namespace detail

inline LikelihoodRecord parse_likelihood_record(const std::string& line) {
    const auto j = detail::parse_object_line(line);
    LikelihoodRecord rec;
    rec.id = detail::require_string(j, "id");
    const auto& toks = detail::require_key(j, "tokens");
    if (!toks.is_array()) throw ValidationError("'tokens' must be an array");
    for (const auto& t : toks) {
        if (!t.is_string()) throw ValidationError("'tokens' must contain only strings");
        rec.tokens.push_back(t.get<std::string>());
    }
    rec.logp_s2s = detail::json_number_array(detail::require_key(j, "logp_s2s"), "logp_s2s");
    rec.logp_lm = detail::json_number_array(detail::require_key(j, "logp_lm"), "logp_lm");
    if (auto it = j.find("entropy_s2s"); it != j.end() && !it->is_null())
        rec.entropy_s2s = detail::json_number_array(*it, "entropy_s2s");
    if (auto it = j.find("entropy_lm"); it != j.end() && !it->is_null())
        rec.entropy_lm = detail::json_number_array(*it, "entropy_lm");
    validate(rec);
    return rec;
}

inline std::vector<LikelihoodRecord> read_likelihood_dump(std::istream& in,
                                                         const std::string& source = "<stream>") {
    std::vector<LikelihoodRecord> out;
    std::unordered_set<std::string> seen;
    detail::for_each_line(in, source, [&](const std::string& line, std::size_t) {
        auto rec = parse_likelihood_record(line);
        if (!seen.insert(rec.id).second) throw ValidationError("duplicate id '" + rec.id + "'");
        out.push_back(std::move(rec));
    });
    return out;
}

inline std::vector<LikelihoodRecord> read_likelihood_dump(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_likelihood_dump(in, path.string());
}

inline nlohmann::json to_json(const LikelihoodRecord& rec) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["tokens"] = rec.tokens;
    j["logp_s2s"] = rec.logp_s2s;
    j["logp_lm"] = rec.logp_lm;
    if (rec.entropy_s2s) j["entropy_s2s"] = *rec.entropy_s2s;
    if (rec.entropy_lm) j["entropy_lm"] = *rec.entropy_lm;
    return j;
}

inline void write_likelihood_dump(std::ostream& out, const std::vector<LikelihoodRecord>& records) {
    for (const auto& rec : records) out << to_json(rec).dump() << '\n';
}

// ---------------------------------------------------------------------------
// AnnotatedPair
// ---------------------------------------------------------------------------

struct AnnotatedPair {
    std::string id;
    std::string article;
    std::string summary;
    std::string system;
    SummaryKind kind = SummaryKind::unknown;
    std::map<Criterion, double> judgments;

    std::optional<double> judgment(Criterion c) const {
        auto it = judgments.find(c);
        if (it == judgments.end()) return std::nullopt;
        return it->second;
    }
};

namespace detail {

inline Criterion require_criterion(std::string_view key) {
    auto c = parse_criterion(key);
    if (!c) throw ValidationError("unknown criterion '" + std::string(key) + "'");
    return *c;
}

inline double require_number(const nlohmann::json& v, std::string_view what) {
    if (!v.is_number()) throw ValidationError(std::string(what) + " must be a number");
    return v.get<double>();
}

/// yes/no label to 1/0; booleans and 0/1 numbers are accepted as well.
inline double qags_label_value(const nlohmann::json& v) {
    if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
    if (v.is_number()) {
        const double x = v.get<double>();
        if (x == 0.0 || x == 1.0) return x;
    }
    if (v.is_string()) {
        const auto s = to_lower_ascii(v.get<std::string>());
        if (s == "yes") return 1.0;
        if (s == "no") return 0.0;
    }
    throw ValidationError("QAGS annotation must be yes/no, got " + v.dump());
}

inline std::map<Criterion, double> summeval_expert_means(const nlohmann::json& experts) {
    if (!experts.is_array() || experts.empty())
        throw ValidationError("no expert annotations present");
    std::map<Criterion, std::pair<double, int>> acc;
    for (const auto& ann : experts) {
        if (!ann.is_object()) throw ValidationError("expert annotation must be an object");
        for (const auto& [key, value] : ann.items()) {
            const auto c = require_criterion(key);
            if (c == Criterion::factuality)
                throw ValidationError("criterion 'factuality' is not a SummEval criterion");
            auto& [sum, count] = acc[c];
            sum += require_number(value, "expert score for '" + key + "'");
            ++count;
        }
    }
    std::map<Criterion, double> out;
    for (const auto& [c, sc] : acc) out[c] = sc.first / sc.second;
    return out;
}

}  // namespace detail

inline AnnotatedPair parse_annotated_pair(const std::string& line, Benchmark benchmark) {
    const auto j = detail::parse_object_line(line);
    AnnotatedPair pair;
    pair.id = detail::require_string(j, "id");
    if (pair.id.empty()) throw ValidationError("empty id");
    pair.article = detail::require_string(j, "article");
    pair.summary = detail::require_string(j, "summary");
    pair.system = j.contains("system") ? detail::require_string(j, "system") : std::string{};
    if (j.contains("kind")) {
        const auto k = detail::require_string(j, "kind");
        auto parsed = parse_kind(k);
        if (!parsed) throw ValidationError("unknown kind '" + k + "'");
        pair.kind = *parsed;
    }

    switch (benchmark) {
        case Benchmark::generic: {
            const auto& judg = detail::require_key(j, "judgments");
            if (!judg.is_object()) throw ValidationError("'judgments' must be an object");
            for (const auto& [key, value] : judg.items())
                pair.judgments[detail::require_criterion(key)] =
                    detail::require_number(value, "judgment '" + key + "'");
            break;
        }
        case Benchmark::frank: {
            pair.judgments[Criterion::factuality] =
                detail::require_number(detail::require_key(j, "factuality"), "'factuality'");
            break;
        }
        case Benchmark::qags: {
            const auto& labels = detail::require_key(j, "annotations");
            if (!labels.is_array() || labels.empty())
                throw ValidationError("'annotations' must be a non-empty list");
            double sum = 0.0;
            for (const auto& v : labels) sum += detail::qags_label_value(v);
            pair.judgments[Criterion::factuality] = sum / static_cast<double>(labels.size());
            break;
        }
        case Benchmark::summeval: {
            auto it = j.find("expert_annotations");
            if (it == j.end()) throw ValidationError("no expert annotations present");
            pair.judgments = detail::summeval_expert_means(*it);
            break;
        }
    }

    if (pair.judgments.empty()) throw ValidationError("empty judgment set");
    for (const auto& [c, v] : pair.judgments) {
        const auto [lo, hi] = judgment_range(c);
        if (!std::isfinite(v) || v < lo || v > hi)
            throw ValidationError("judgment '" + std::string(to_string(c)) + "' = " +
                                  detail::format_double(v) + " outside [" +
                                  detail::format_double(lo) + ", " + detail::format_double(hi) +
                                  "]");
    }
    return pair;
}

inline std::vector<AnnotatedPair> read_annotations(std::istream& in, Benchmark benchmark,
                                                   const std::string& source = "<stream>") {
    std::vector<AnnotatedPair> out;
    std::unordered_set<std::string> seen;
    detail::for_each_line(in, source, [&](const std::string& line, std::size_t) {
        auto pair = parse_annotated_pair(line, benchmark);
        if (!seen.insert(pair.id).second) throw ValidationError("duplicate id '" + pair.id + "'");
        out.push_back(std::move(pair));
    });
    return out;
}

inline std::vector<AnnotatedPair> read_annotations(const std::filesystem::path& path,
                                                   Benchmark benchmark) {
    auto in = detail::open_input(path);
    return read_annotations(in, benchmark, path.string());
}

// ---------------------------------------------------------------------------
// ScoreTable
// ---------------------------------------------------------------------------

/// Per-example scalar scores of one metric. Keeps insertion order so that
/// written tables are byte-stable.
class ScoreTable {
public:
    ScoreTable() = default;
    explicit ScoreTable(std::string metric_name, bool higher_is_better = true)
        : metric_name_(std::move(metric_name)), higher_is_better_(higher_is_better) {}

    const std::string& metric_name() const noexcept { return metric_name_; }
    void set_metric_name(std::string name) { metric_name_ = std::move(name); }
    bool higher_is_better() const noexcept { return higher_is_better_; }

    void insert(std::string id, double score) {
        if (!std::isfinite(score))
            throw ValidationError("score for '" + id + "' in '" + metric_name_ + "' is not finite");
        if (index_.count(id)) throw ValidationError("duplicate id '" + id + "' in '" + metric_name_ + "'");
        index_.emplace(id, values_.size());
        ids_.push_back(std::move(id));
        values_.push_back(score);
    }

    std::optional<double> find(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return values_[it->second];
    }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::vector<double>& values() const noexcept { return values_; }

    friend bool operator==(const ScoreTable& a, const ScoreTable& b) {
        return a.metric_name_ == b.metric_name_ && a.higher_is_better_ == b.higher_is_better_ &&
               a.ids_ == b.ids_ && a.values_ == b.values_;
    }

private:
    std::string metric_name_;
    bool higher_is_better_ = true;
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Tab-separated `id<TAB><metric_name>` header followed by one `id<TAB>score` row per entry.
inline void write_score_table(std::ostream& out, const ScoreTable& table) {
    out << "id\t" << table.metric_name() << '\n';
    for (std::size_t i = 0; i < table.size(); ++i)
        out << table.ids()[i] << '\t' << detail::format_double(table.values()[i]) << '\n';
}

inline void write_score_table_jsonl(std::ostream& out, const ScoreTable& table) {
    for (std::size_t i = 0; i < table.size(); ++i) {
        nlohmann::json j;
        j["id"] = table.ids()[i];
        j["metric"] = table.metric_name();
        j["score"] = table.values()[i];
        out << j.dump() << '\n';
    }
}

namespace detail {

inline double parse_score_cell(std::string_view text) {
    const std::string s(trim(text));
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ValidationError("score '" + s + "' is not a number");
    }
    if (used != s.size()) throw ValidationError("score '" + s + "' is not a number");
    return v;
}

}  // namespace detail

/// Reads either the tab/comma separated form or line-delimited objects
/// (`{"id":..., "score":..., "metric":...}`), detected from the first
/// non-blank character.
inline ScoreTable read_score_table(std::istream& in, const std::string& source = "<stream>") {
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();
    const auto first = content.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw ValidationError(source + ": empty score table");

    std::istringstream lines(content);
    if (content[first] == '{') {
        ScoreTable table;
        bool named = false;
        detail::for_each_line(lines, source, [&](const std::string& line, std::size_t) {
            const auto j = detail::parse_object_line(line);
            const auto id = detail::require_string(j, "id");
            const double score = detail::require_number(detail::require_key(j, "score"), "'score'");
            if (auto it = j.find("metric"); it != j.end()) {
                if (!it->is_string()) throw ValidationError("'metric' must be a string");
                if (!named) {
                    table = ScoreTable(it->get<std::string>(), j.value("higher_is_better", true));
                    named = true;
                } else if (it->get<std::string>() != table.metric_name()) {
                    throw ValidationError("mixed metric names in one score table");
                }
            }
            table.insert(id, score);
        });
        if (!named) table.set_metric_name(std::filesystem::path(source).stem().string());
        return table;
    }

    ScoreTable table;
    bool header_seen = false;
    char delim = '\t';
    detail::for_each_line(lines, source, [&](const std::string& raw, std::size_t) {
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            delim = line.find('\t') != std::string::npos ? '\t' : ',';
            auto cells = detail::split(line, delim);
            if (cells.size() != 2) throw ValidationError("header must have two columns: id, metric name");
            table = ScoreTable(std::string(detail::trim(cells[1])));
            header_seen = true;
            return;
        }
        auto cells = detail::split(line, delim);
        if (cells.size() != 2) throw ValidationError("expected two columns: id, score");
        table.insert(std::string(detail::trim(cells[0])), detail::parse_score_cell(cells[1]));
    });
    return table;
}

inline ScoreTable read_score_table(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_score_table(in, path.string());
}

}  // namespace harim
