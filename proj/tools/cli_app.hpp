#pragma once

// `harim` command-line front end: score, baseline, correlate, permtest, schema.
//
// Exit codes: 0 success, 2 input validation failure, 3 statistical
// degeneracy (undefined correlation), 1 anything else.

#include <harim/harim.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace harim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitDegenerate = 3;

namespace detail {

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

struct Input {
    std::string path;
    std::string content;
};

/// Whole-file read; "-" reads standard input.
inline Input read_input(const std::string& path, std::istream& stdin_stream) {
    std::ostringstream buf;
    if (path == "-") {
        buf << stdin_stream.rdbuf();
    } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ValidationError("cannot open '" + path + "'");
        buf << in.rdbuf();
    }
    return {path, buf.str()};
}

inline void write_output(const std::string& path, const std::string& content, std::ostream& stdout_stream) {
    if (path == "-") {
        stdout_stream << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << content;
}

/// Records how an output was produced. Holds no timestamps so identical
/// invocations give identical manifests.
class Manifest {
public:
    explicit Manifest(std::string command) {
        doc_["tool"] = "harim";
        doc_["version"] = kVersion;
        doc_["command"] = std::move(command);
        doc_["config"] = nlohmann::json::object();
        doc_["inputs"] = nlohmann::json::array();
    }

    template <typename T>
    void set(const std::string& key, const T& value) {
        doc_["config"][key] = value;
    }

    void add_input(const Input& in) {
        doc_["inputs"].push_back({{"path", in.path}, {"sha256", sha256_hex(in.content)}});
    }

    void emit(const std::string& out_path, const std::string& manifest_path, const std::string& output,
              std::ostream& stdout_stream) {
        std::string target = manifest_path;
        if (target.empty()) {
            if (out_path == "-") return;
            target = out_path + ".manifest.json";
        }
        doc_["output"] = {{"path", out_path}, {"sha256", sha256_hex(output)}};
        write_output(target, doc_.dump(2) + "\n", stdout_stream);
    }

private:
    nlohmann::ordered_json doc_;
};

template <typename Enum, typename Parser>
Enum parse_or_throw(const std::string& text, Parser parse, const char* what) {
    auto v = parse(text);
    if (!v) throw ValidationError(std::string("unknown ") + what + " '" + text + "'");
    return *v;
}

inline std::vector<AnnotatedPair> load_pairs(const Input& in, const std::string& benchmark) {
    std::istringstream is(in.content);
    return read_annotations(is, parse_or_throw<Benchmark>(benchmark, parse_benchmark, "benchmark"),
                           in.path);
}

inline ScoreTable load_scores(const Input& in) {
    std::istringstream is(in.content);
    return read_score_table(is, in.path);
}

inline std::string render_table(const ScoreTable& table, const std::string& format) {
    std::ostringstream os;
    if (format == "jsonl")
        write_score_table_jsonl(os, table);
    else
        write_score_table(os, table);
    return os.str();
}

inline std::vector<std::string> variant_names() {
    std::vector<std::string> out;
    for (auto v : kAllVariants) out.emplace_back(to_string(v));
    return out;
}

inline const char* kSchemaText = R"(harim file formats
==================

Likelihood dump (input of `score`)
  UTF-8, one JSON object per line:
    id           string, unique; joins with the annotation id
    tokens       [string], length L >= 1
    logp_s2s     [number], length L, natural-log p(y_i | y_<i, article), each <= 0
    logp_lm      [number], length L, natural-log p(y_i | y_<i, empty source), each <= 0
    entropy_s2s  [number], optional, length L, nats, each >= 0
    entropy_lm   [number], optional, length L, nats, each >= 0
  Log-probabilities in (0, 1e-9] are clamped to 0; larger positive values are rejected.

Annotation file (input of `baseline`, `correlate`, `permtest`)
  UTF-8, one JSON object per line with keys
    id, article, summary, system, kind (abstractive|extractive|reference|unknown)
  plus, depending on --benchmark:
    generic   judgments: {criterion: number}
    frank     factuality: number in [0, 1]
    qags      annotations: ["yes" | "no", ...]      (yes = 1, no = 0, averaged)
    summeval  expert_annotations: [{criterion: number}, ...]  (averaged per criterion;
              turker_annotations are ignored)
  Criteria: factuality in [0, 1]; consistency, coherence, fluency, relevance in [1, 5].

Score table (output of `score`/`baseline`, input of `correlate`/`permtest`)
  Tab-separated, header `id<TAB><metric name>`, then `id<TAB>score` rows;
  comma-separated is accepted on input. Alternatively one JSON object per
  line: {"id": ..., "metric": ..., "score": ...}. All scores are higher-is-better.

Correlation report (output of `correlate`)
  Tab-separated: metric, criterion, level, split, coefficient, value, n

Permutation test (output of `permtest`)
  Tab-separated: metric_a, metric_b, criterion, coefficient, observed_gap,
  p_value, n_permutations, seed, n
  With --all-pairs: a k x k grid, 1 = significant difference (p <= alpha).
)";

}  // namespace detail

struct Streams {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
};

inline int run(int argc, const char* const* argv, Streams io) {
    CLI::App app{"Reference-free summary scoring with hallucination risk, plus meta-evaluation tools", "harim"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // score
    std::string dump_path, variant_name = "harim_plus", aggregation_name = "mean";
    std::string out_path = "-", manifest_path, metric_name, format = "tsv";
    HarimConfig harim_cfg;
    auto* score = app.add_subcommand("score", "Score a likelihood dump with a HaRiM variant");
    score->add_option("--dump", dump_path, "Likelihood dump (JSONL, '-' for stdin)")->required();
    score->add_option("--variant", variant_name, "Score variant")
        ->check(CLI::IsMember(detail::variant_names()))
        ->capture_default_str();
    score->add_option("--lambda", harim_cfg.lambda, "Weight of the risk term in harim_plus")->capture_default_str();
    score->add_option("--aggregation", aggregation_name, "Token aggregation")
        ->check(CLI::IsMember({"mean", "sum", "top5_mean", "bot5_mean"}))
        ->capture_default_str();
    score->add_option("--delta-exponent", harim_cfg.delta_exponent, "Exponent of the (1 - delta) factor")
        ->capture_default_str();
    score->add_option("--name", metric_name, "Metric name in the output header (default: variant)");
    score->add_option("--format", format, "Output format")->check(CLI::IsMember({"tsv", "jsonl"}))->capture_default_str();

    // baseline
    std::string pairs_path, benchmark = "generic", baseline_metric = "novel_ngram", denominator_name = "article";
    NgramConfig ngram_cfg;
    bool keep_case = false;
    auto* baseline = app.add_subcommand("baseline", "Compute NovelNgram or length baselines");
    baseline->add_option("--pairs", pairs_path, "Annotation file ('-' for stdin)")->required();
    baseline->add_option("--benchmark", benchmark, "Annotation layout")
        ->check(CLI::IsMember({"generic", "frank", "qags", "summeval"}))
        ->capture_default_str();
    baseline->add_option("--metric", baseline_metric, "Baseline metric")
        ->check(CLI::IsMember({"novel_ngram", "length"}))
        ->capture_default_str();
    baseline->add_option("-n,--n", ngram_cfg.n, "N-gram order")->check(CLI::PositiveNumber)->capture_default_str();
    baseline->add_option("--denominator", denominator_name, "N-gram set used as denominator")
        ->check(CLI::IsMember({"article", "output"}))
        ->capture_default_str();
    baseline->add_flag("--keep-case", keep_case, "Do not lowercase before tokenizing");
    baseline->add_option("--name", metric_name, "Metric name in the output header");
    baseline->add_option("--format", format, "Output format")->check(CLI::IsMember({"tsv", "jsonl"}))->capture_default_str();

    // correlate
    std::vector<std::string> score_paths;
    std::string criterion_name = "factuality", coef_name = "kendall", level_name = "segment", split_spec = "all";
    bool matrix_mode = false;
    auto* correlate_cmd = app.add_subcommand("correlate", "Correlate score tables with human judgments");
    correlate_cmd->add_option("--scores", score_paths, "Score table(s)")->required()->expected(1, -1);
    correlate_cmd->add_option("--pairs", pairs_path, "Annotation file ('-' for stdin)");
    correlate_cmd->add_option("--benchmark", benchmark, "Annotation layout")
        ->check(CLI::IsMember({"generic", "frank", "qags", "summeval"}))
        ->capture_default_str();
    correlate_cmd->add_option("--criterion", criterion_name, "Human judgment criterion")->capture_default_str();
    correlate_cmd->add_option("--coef", coef_name, "kendall, spearman, pearson or all")->capture_default_str();
    correlate_cmd->add_option("--level", level_name, "segment or system")
        ->check(CLI::IsMember({"segment", "system"}))
        ->capture_default_str();
    correlate_cmd->add_option("--split", split_spec, "Pair filter: all, kind=<kind> or system=<label>")
        ->capture_default_str();
    correlate_cmd->add_flag("--metric-matrix", matrix_mode,
                            "Emit the metric-metric correlation matrix instead (no annotations needed)");

    // permtest
    std::size_t n_permutations = 1000;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    bool all_pairs = false;
    std::string results_path;
    auto* permtest = app.add_subcommand("permtest", "Paired permutation test between metrics");
    permtest->add_option("--scores", score_paths, "Score tables (2, or k >= 2 with --all-pairs)")
        ->required()
        ->expected(2, -1);
    permtest->add_option("--pairs", pairs_path, "Annotation file ('-' for stdin)")->required();
    permtest->add_option("--benchmark", benchmark, "Annotation layout")
        ->check(CLI::IsMember({"generic", "frank", "qags", "summeval"}))
        ->capture_default_str();
    permtest->add_option("--criterion", criterion_name, "Human judgment criterion")->capture_default_str();
    permtest->add_option("--coef", coef_name, "kendall, spearman or pearson")->capture_default_str();
    permtest->add_option("--split", split_spec, "Pair filter: all, kind=<kind> or system=<label>")
        ->capture_default_str();
    permtest->add_option("--n-permutations", n_permutations, "Permutation rounds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    permtest->add_option("--seed", seed, "Random seed")->capture_default_str();
    permtest->add_option("--alpha", alpha, "Significance threshold for the grid")->capture_default_str();
    permtest->add_flag("--all-pairs", all_pairs, "Test every pair of score tables and emit the significance grid");
    permtest->add_option("--results", results_path, "With --all-pairs, also write every pairwise result here");

    auto* schema = app.add_subcommand("schema", "Print the supported file formats");

    for (auto* sub : {score, baseline, correlate_cmd, permtest}) {
        sub->add_option("-o,--out", out_path, "Output path ('-' for stdout)")->capture_default_str();
        sub->add_option("--manifest", manifest_path, "Manifest path (default: <out>.manifest.json)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, io.out, io.err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (schema->parsed()) {
            io.out << detail::kSchemaText;
            return kExitOk;
        }

        if (score->parsed()) {
            harim_cfg.aggregation = *parse_aggregation(aggregation_name);
            const auto variant = *parse_variant(variant_name);
            validate(harim_cfg);
            const auto input = detail::read_input(dump_path, io.in);
            std::istringstream is(input.content);
            const auto records = read_likelihood_dump(is, input.path);
            const auto table = score_batch(records, variant, harim_cfg, metric_name);
            const auto rendered = detail::render_table(table, format);
            detail::write_output(out_path, rendered, io.out);

            detail::Manifest m("score");
            m.set("variant", variant_name);
            m.set("lambda", harim_cfg.lambda);
            m.set("aggregation", aggregation_name);
            m.set("delta_exponent", harim_cfg.delta_exponent);
            m.set("metric_name", table.metric_name());
            m.add_input(input);
            m.emit(out_path, manifest_path, rendered, io.out);
            return kExitOk;
        }

        if (baseline->parsed()) {
            ngram_cfg.lowercase = !keep_case;
            ngram_cfg.denominator = *parse_denominator(denominator_name);
            const auto input = detail::read_input(pairs_path, io.in);
            const auto pairs = detail::load_pairs(input, benchmark);
            auto table = baseline_metric == "length" ? length_table(pairs) : novel_ngram_table(pairs, ngram_cfg);
            if (!metric_name.empty()) table.set_metric_name(metric_name);
            const auto rendered = detail::render_table(table, format);
            detail::write_output(out_path, rendered, io.out);

            detail::Manifest m("baseline");
            m.set("metric", baseline_metric);
            m.set("benchmark", benchmark);
            if (baseline_metric == "novel_ngram") {
                m.set("n", ngram_cfg.n);
                m.set("denominator", denominator_name);
                m.set("lowercase", ngram_cfg.lowercase);
            }
            m.add_input(input);
            m.emit(out_path, manifest_path, rendered, io.out);
            return kExitOk;
        }

        if (correlate_cmd->parsed()) {
            std::vector<Coefficient> coefs;
            if (coef_name == "all")
                coefs.assign(std::begin(kAllCoefficients), std::end(kAllCoefficients));
            else
                coefs.push_back(detail::parse_or_throw<Coefficient>(coef_name, parse_coefficient, "coefficient"));

            detail::Manifest m("correlate");
            std::vector<ScoreTable> tables;
            for (const auto& p : score_paths) {
                const auto input = detail::read_input(p, io.in);
                tables.push_back(detail::load_scores(input));
                m.add_input(input);
            }

            std::ostringstream os;
            if (matrix_mode) {
                if (coefs.size() != 1) throw ValidationError("--metric-matrix needs a single coefficient");
                const auto matrix = metric_metric_matrix(tables, coefs.front());
                write_matrix(os, matrix);
                m.set("mode", "metric_matrix");
                m.set("coefficient", std::string(to_string(coefs.front())));
                m.set("shared_ids", matrix.shared_ids);
            } else {
                if (pairs_path.empty()) throw ValidationError("--pairs is required unless --metric-matrix is given");
                const auto criterion = detail::parse_or_throw<Criterion>(criterion_name, parse_criterion, "criterion");
                const auto level = *parse_level(level_name);
                const auto split = SplitFilter::parse(split_spec);
                const auto input = detail::read_input(pairs_path, io.in);
                const auto pairs = detail::load_pairs(input, benchmark);
                m.add_input(input);
                write_report_header(os);
                for (const auto& t : tables)
                    for (auto c : coefs) write_report_row(os, correlation_report(t, pairs, criterion, c, level, split));
                m.set("benchmark", benchmark);
                m.set("criterion", criterion_name);
                m.set("coefficient", coef_name);
                m.set("level", level_name);
                m.set("split", split.describe());
            }
            detail::write_output(out_path, os.str(), io.out);
            m.emit(out_path, manifest_path, os.str(), io.out);
            return kExitOk;
        }

        if (permtest->parsed()) {
            PermTestConfig cfg;
            cfg.criterion = detail::parse_or_throw<Criterion>(criterion_name, parse_criterion, "criterion");
            cfg.coefficient = detail::parse_or_throw<Coefficient>(coef_name, parse_coefficient, "coefficient");
            cfg.n_permutations = n_permutations;
            cfg.seed = seed;
            cfg.split = SplitFilter::parse(split_spec);
            if (!all_pairs && score_paths.size() != 2)
                throw ValidationError("permtest takes exactly 2 score tables unless --all-pairs is given");

            detail::Manifest m("permtest");
            std::vector<ScoreTable> tables;
            for (const auto& p : score_paths) {
                const auto input = detail::read_input(p, io.in);
                tables.push_back(detail::load_scores(input));
                m.add_input(input);
            }
            const auto input = detail::read_input(pairs_path, io.in);
            const auto pairs = detail::load_pairs(input, benchmark);
            m.add_input(input);

            std::ostringstream os;
            if (all_pairs) {
                const auto grid = significance_grid(tables, pairs, cfg, alpha);
                write_grid(os, grid);
                if (!results_path.empty()) {
                    std::ostringstream rs;
                    write_perm_header(rs);
                    for (const auto& r : grid.results) write_perm_row(rs, r);
                    detail::write_output(results_path, rs.str(), io.out);
                }
                m.set("mode", "all_pairs");
                m.set("alpha", alpha);
            } else {
                write_perm_header(os);
                write_perm_row(os, perm_input_test(tables[0], tables[1], pairs, cfg));
            }
            m.set("benchmark", benchmark);
            m.set("criterion", criterion_name);
            m.set("coefficient", std::string(to_string(cfg.coefficient)));
            m.set("split", cfg.split.describe());
            m.set("n_permutations", n_permutations);
            m.set("seed", seed);
            detail::write_output(out_path, os.str(), io.out);
            m.emit(out_path, manifest_path, os.str(), io.out);
            return kExitOk;
        }
    } catch (const ValidationError& e) {
        io.err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const DegenerateError& e) {
        io.err << "error: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}

inline int run(const std::vector<std::string>& args, Streams io) {
    std::vector<const char*> argv;
    argv.push_back("harim");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), io);
}

}  // namespace harim::cli
