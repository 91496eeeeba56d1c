#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edc2rag/clustering.hpp"
#include "edc2rag/corpus.hpp"
#include "edc2rag/evaluation.hpp"
#include "edc2rag/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace edc2rag;

namespace {

std::optional<int> parse_lambda(const std::string& text) {
    if (text == "unbounded" || text == "none" || text == "0") return std::nullopt;
    return std::stoi(text);
}

// key=value lines; blank lines, comments, and [section] headers are ignored
std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> values;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#' || line[first] == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line is not key=value: " + line);
        }
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        values[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return values;
}

int cmd_build_noise(const std::string& input, const std::string& output, int top_k,
                    double noise_rate) {
    std::vector<DatasetRow> out_rows;
    std::vector<std::string> shortfalls;
    const auto rows = read_dataset(input);
    for (const auto& row : rows) {
        try {
            const LabeledPool pool = label_pool(row);
            NoiseSpec spec{top_k, noise_rate};
            const RetrievedSet mixed = build_noisy_set(pool, spec);
            DatasetRow out_row;
            out_row.query = row.query;
            out_row.docs = mixed.documents();
            out_row.scores = row.scores;
            out_row.gold_label = row.gold_label;
            out_row.spec = ordered_json{{"top_k", top_k}, {"noise_rate", noise_rate}};
            int has_answer = 0, noise = 0;
            for (const auto& doc : out_row.docs) {
                (doc.label == DocLabel::Noise ? noise : has_answer)++;
            }
            std::cout << row.query.id << ": has_answer=" << has_answer << " noise=" << noise
                      << "\n";
            out_rows.push_back(std::move(out_row));
        } catch (const std::exception& e) {
            shortfalls.emplace_back(e.what());
        }
    }
    if (!shortfalls.empty()) {
        for (const auto& s : shortfalls) std::cerr << "error: " << s << "\n";
        return 1;
    }
    write_dataset(output, out_rows);
    std::cout << "wrote " << out_rows.size() << " queries to " << output << "\n";
    return 0;
}

int cmd_cluster(const std::string& input, const std::string& output, int tau,
                const std::string& lambda_text, const std::string& strategy_text,
                std::uint64_t seed, int merge_tail_below,
                const std::optional<std::string>& embeddings_file) {
    const auto rows = read_dataset(input);
    const auto lambda = parse_lambda(lambda_text);
    const Strategy strategy = strategy_from_string(strategy_text);

    HashEmbeddingBackend embedder(SplitRng(seed).split("embed").next_u64());
    std::map<std::string, EmbeddingVector> store;
    if (embeddings_file) {
        std::ifstream in(*embeddings_file);
        if (!in) throw std::runtime_error("cannot open embeddings file: " + *embeddings_file);
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto j = nlohmann::json::parse(line);
            store.emplace(j.at("key").get<std::string>(),
                          EmbeddingVector(j.at("values").get<std::vector<double>>()));
        }
    }

    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + output);
    for (const auto& row : rows) {
        const RetrievedSet docs = row.retrieved();
        const int n = static_cast<int>(docs.size());
        const SizePlan plan = plan_sizes(n, std::min(tau, n), lambda, merge_tail_below);
        Clustering clustering;
        if (strategy == Strategy::Average) {
            clustering = average_cluster(docs, static_cast<int>(plan.sizes.size()));
        } else if (strategy == Strategy::Random) {
            clustering = random_cluster(
                docs, plan, SplitRng(seed).split("query:" + row.query.id).next_u64());
        } else {
            EmbeddingMap doc_embeddings;
            EmbeddingVector query_embedding;
            if (!store.empty()) {
                for (const auto& doc : docs.documents()) {
                    auto it = store.find(doc.id);
                    if (it == store.end()) {
                        throw std::runtime_error("missing embedding for document: " + doc.id);
                    }
                    doc_embeddings.emplace(doc.id, it->second);
                }
                query_embedding = store.at(row.query.id);
            } else {
                std::vector<std::string> texts{row.query.text};
                for (const auto& doc : docs.documents()) texts.push_back(doc.text);
                const auto vectors = embedder.embed(texts);
                query_embedding = vectors.front();
                for (std::size_t i = 0; i < docs.size(); ++i) {
                    doc_embeddings.emplace(docs.documents()[i].id, vectors[i + 1]);
                }
            }
            clustering = dynamic_cluster(docs, doc_embeddings, query_embedding,
                                         std::min(tau, n), lambda, merge_tail_below);
        }
        out << clustering_to_json(clustering).dump() << "\n";
    }
    std::cout << "wrote clusterings for " << rows.size() << " queries to " << output << "\n";
    return 0;
}

struct RecordFile {
    ordered_json record;
    std::string query_id;
};

std::vector<fs::path> run_dirs_under(const fs::path& root) {
    if (fs::is_directory(root / "records")) return {root};
    std::vector<fs::path> dirs;
    if (fs::is_directory(root)) {
        for (const auto& entry : fs::directory_iterator(root)) {
            if (entry.is_directory() && fs::is_directory(entry.path() / "records")) {
                dirs.push_back(entry.path());
            }
        }
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

std::vector<RecordFile> read_records(const fs::path& run_dir) {
    std::vector<RecordFile> records;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(run_dir / "records")) {
        if (entry.path().extension() == ".json") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& path : paths) {
        std::ifstream in(path);
        ordered_json j = ordered_json::parse(in);
        RecordFile rf;
        rf.query_id = j.at("query_id").get<std::string>();
        rf.record = std::move(j);
        records.push_back(std::move(rf));
    }
    return records;
}

std::map<std::string, DatasetRow> read_query_snapshot(const fs::path& run_dir) {
    std::map<std::string, DatasetRow> by_id;
    for (auto& row : read_dataset(run_dir / "queries.jsonl")) {
        by_id.emplace(row.query.id, std::move(row));
    }
    return by_id;
}

int eval_consistency(const fs::path& run_dir) {
    const auto queries = read_query_snapshot(run_dir);
    const fs::path clusters_dir = run_dir / "clusters";
    if (!fs::is_directory(clusters_dir)) {
        std::cerr << "error: no clusters/ directory under " << run_dir
                  << " (consistency needs a clustering method run)\n";
        return 1;
    }

    double useful_sum = 0.0, noise_sum = 0.0, rand_sum = 0.0;
    int useful_n = 0, noise_n = 0, rand_n = 0;
    for (const auto& entry : fs::directory_iterator(clusters_dir)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        const Clustering clustering = clustering_from_json(ordered_json::parse(in));
        auto qit = queries.find(clustering.source_query_id);
        if (qit == queries.end()) continue;

        std::map<std::string, std::string> labels;
        for (const auto& doc : qit->second.docs) {
            // has_answer and useful both count as the useful class
            const bool useful = doc.label == DocLabel::HasAnswer || doc.label == DocLabel::Useful;
            labels[doc.id] = useful ? "useful" : to_string(doc.label);
        }
        try {
            useful_sum += intra_class_consistency(clustering, labels, "useful");
            ++useful_n;
        } catch (const std::invalid_argument&) {
        }
        try {
            noise_sum += intra_class_consistency(clustering, labels, "noise");
            ++noise_n;
        } catch (const std::invalid_argument&) {
        }
        rand_sum += random_baseline_consistency(static_cast<int>(clustering.num_clusters()));
        ++rand_n;
    }
    if (rand_n == 0) {
        std::cerr << "error: no clusterings found under " << clusters_dir << "\n";
        return 1;
    }
    char line[128];
    if (useful_n > 0) {
        std::snprintf(line, sizeof(line), "Useful Prob. (%%)  %6.2f\n",
                      100.0 * useful_sum / useful_n);
        std::cout << line;
    }
    std::snprintf(line, sizeof(line), "Rand. Useful (%%)  %6.2f\n", 100.0 * rand_sum / rand_n);
    std::cout << line;
    if (noise_n > 0) {
        std::snprintf(line, sizeof(line), "Noise Prob. (%%)   %6.2f\n",
                      100.0 * noise_sum / noise_n);
        std::cout << line;
    }
    std::snprintf(line, sizeof(line), "Rand. Noise (%%)   %6.2f\n", 100.0 * rand_sum / rand_n);
    std::cout << line;
    return 0;
}

double spec_mix(const DatasetRow& row) {
    if (row.spec.contains("noise_rate")) return row.spec["noise_rate"].get<double>();
    if (row.spec.contains("r")) return row.spec["r"].get<double>();
    return 0.0;
}

int spec_top_k(const DatasetRow& row) {
    if (row.spec.contains("top_k")) return row.spec["top_k"].get<int>();
    return static_cast<int>(row.docs.size());
}

int cmd_eval(const std::string& results_dir, const std::string& metric) {
    if (metric != "f1" && metric != "acc" && metric != "balacc" && metric != "consistency") {
        std::cerr << "error: unknown metric '" << metric
                  << "' (expected f1|acc|balacc|consistency)\n";
        return 1;
    }
    const auto run_dirs = run_dirs_under(results_dir);
    if (run_dirs.empty()) {
        std::cerr << "error: no run directories (with records/) under " << results_dir << "\n";
        return 1;
    }
    if (metric == "consistency") {
        int rc = 0;
        for (const auto& dir : run_dirs) rc |= eval_consistency(dir);
        return rc;
    }

    std::vector<MetricSample> samples;
    ConfusionCounts confusion;
    for (const auto& dir : run_dirs) {
        const auto queries = read_query_snapshot(dir);
        for (const auto& rf : read_records(dir)) {
            auto qit = queries.find(rf.query_id);
            if (qit == queries.end()) continue;
            const DatasetRow& row = qit->second;
            MetricSample sample;
            sample.method = rf.record.at("method").get<std::string>();
            sample.top_k = spec_top_k(row);
            sample.mix = spec_mix(row);

            if (metric == "f1") {
                if (row.query.task != TaskKind::KQA || !rf.record.contains("final_answer")) {
                    std::cerr << "error: f1 requires KQA records (query " << rf.query_id
                              << ")\n";
                    return 1;
                }
                sample.task = "kqa";
                sample.value =
                    token_f1(rf.record["final_answer"]["selected"].get<std::string>(),
                             row.query.gold_answers)
                        .f1;
            } else {  // acc | balacc
                if (row.query.task == TaskKind::KQA || !rf.record.contains("verdict") ||
                    !row.gold_label) {
                    std::cerr << "error: " << metric
                              << " requires verdict records with gold labels (query "
                              << rf.query_id << ")\n";
                    return 1;
                }
                const std::string kind = rf.record["verdict"]["kind"].get<std::string>();
                const std::string& gold = *row.gold_label;
                const bool gold_positive = gold == "factual" || gold == "1";
                const bool pred_positive = kind == "Factual" || kind == "Answer 1";
                if (gold_positive && pred_positive) confusion.tp++;
                if (gold_positive && !pred_positive) confusion.fn++;
                if (!gold_positive && !pred_positive) confusion.tn++;
                if (!gold_positive && pred_positive) confusion.fp++;
                sample.task = to_string(row.query.task);
                sample.value = (gold_positive == pred_positive) ? 100.0 : 0.0;
            }
            samples.push_back(std::move(sample));
        }
    }
    if (samples.empty()) {
        std::cerr << "error: no records found under " << results_dir << "\n";
        return 1;
    }

    const auto cells = aggregate(samples);
    std::cout << summary_table(cells);
    if (metric == "acc") {
        std::cout << "accuracy: " << accuracy(confusion) << "\n";
    } else if (metric == "balacc") {
        std::cout << "balanced_accuracy: " << balanced_accuracy(confusion) << "\n";
    }
    const fs::path out_csv = fs::path(results_dir) / ("eval_" + metric + ".csv");
    std::ofstream csv(out_csv, std::ios::binary | std::ios::trunc);
    csv << summary_csv(cells);
    std::cout << "wrote " << out_csv.string() << "\n";
    return 0;
}

int cmd_cost(const std::string& results_dir, const std::string& prices_text,
             const std::string& baseline) {
    const auto comma = prices_text.find(',');
    if (comma == std::string::npos) {
        std::cerr << "error: --prices expects in,out per million tokens\n";
        return 1;
    }
    PriceSchedule schedule;
    schedule.input_usd_per_million = std::stod(prices_text.substr(0, comma));
    schedule.output_usd_per_million = std::stod(prices_text.substr(comma + 1));

    const auto run_dirs = run_dirs_under(results_dir);
    if (run_dirs.empty()) {
        std::cerr << "error: no run directories (with records/) under " << results_dir << "\n";
        return 1;
    }

    struct Totals {
        double input = 0.0, output = 0.0;
        int queries = 0;
    };
    std::map<std::string, Totals> by_method;
    for (const auto& dir : run_dirs) {
        for (const auto& rf : read_records(dir)) {
            Totals& totals = by_method[rf.record.at("method").get<std::string>()];
            totals.queries++;
            for (const auto& u : rf.record.at("usage")) {
                totals.input += u.at("prompt_tokens").get<double>();
                totals.output += u.at("completion_tokens").get<double>();
            }
        }
    }
    if (by_method.empty()) {
        std::cerr << "error: no usage recorded under " << results_dir << "\n";
        return 1;
    }
    auto baseline_it = by_method.find(baseline);
    if (baseline_it == by_method.end()) {
        std::cerr << "error: baseline method '" << baseline << "' has no run under "
                  << results_dir << "\n";
        return 1;
    }

    auto report_for = [&](const Totals& totals, std::optional<double> base) {
        return compute_cost(totals.input / totals.queries, totals.output / totals.queries,
                            schedule, base);
    };
    const double baseline_cost = report_for(baseline_it->second, std::nullopt).api_cost_usd;

    std::cout << "method          Avg Input    Avg Output   API Cost (x1e-4)  Rel. Cost\n";
    for (const auto& [method, totals] : by_method) {
        const CostReport report = report_for(totals, baseline_cost);
        char line[160];
        std::snprintf(line, sizeof(line), "%-15s %-12.2f %-12.2f %-17.2f %.2f\n",
                      method.c_str(), report.avg_input_tokens, report.avg_output_tokens,
                      report.api_cost_usd * 1e4,
                      report.relative_cost ? *report.relative_cost : 1.0);
        std::cout << line;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic clustering-based retrieval compression pipeline"};
    app.require_subcommand(1);

    // build-noise ------------------------------------------------------------
    std::string bn_input, bn_output;
    int bn_top_k = 20;
    double bn_noise_rate = 0.0;
    auto* build_noise = app.add_subcommand("build-noise", "Label a retrieval pool and mix a "
                                                          "noisy top-k dataset");
    build_noise->add_option("input", bn_input, "input pool JSONL")->required();
    build_noise->add_option("output", bn_output, "output dataset JSONL")->required();
    build_noise->add_option("--top-k", bn_top_k, "documents per query");
    build_noise->add_option("--noise-rate", bn_noise_rate, "fraction of noise documents");

    // cluster ----------------------------------------------------------------
    std::string cl_input, cl_output, cl_lambda = "20", cl_strategy = "dynamic";
    std::optional<std::string> cl_embeddings;
    int cl_tau = 3, cl_merge_tail = 0;
    std::uint64_t cl_seed = 0;
    auto* cluster = app.add_subcommand("cluster", "Cluster each query's documents and write "
                                                  "the clustering JSON per line");
    cluster->add_option("input", cl_input, "dataset JSONL")->required();
    cluster->add_option("output", cl_output, "clusterings JSONL")->required();
    cluster->add_option("--tau", cl_tau, "initial cluster size");
    cluster->add_option("--lambda", cl_lambda, "cluster size cap or 'unbounded'");
    cluster->add_option("--strategy", cl_strategy, "dynamic|average|random");
    cluster->add_option("--seed", cl_seed, "RNG seed");
    cluster->add_option("--merge-tail-below", cl_merge_tail,
                        "merge a final cluster of at most this size into its predecessor");
    cluster->add_option("--embeddings", cl_embeddings, "JSONL of {key, values} vectors");

    // run ----------------------------------------------------------------------
    std::string run_dataset_path, run_method = "edc2", run_backend = "mock",
                run_lambda = "20", run_out = "out", run_templates = "prompts";
    std::optional<std::string> run_embeddings;
    std::string run_config_file;
    RunOptions run_options;
    auto* run = app.add_subcommand("run", "Run a method over a dataset and write records");
    run->add_option("--config", run_config_file, "key=value config file (CLI flags win)");
    run->add_option("dataset", run_dataset_path, "dataset JSONL")->required();
    run->add_option("--method", run_method, "edc2|vanilla|chunk|edc2-avg|edc2-random");
    run->add_option("--tau", run_options.pipeline.tau, "initial cluster size");
    run->add_option("--lambda", run_lambda, "cluster size cap or 'unbounded'");
    run->add_option("--top-k", run_options.pipeline.top_k, "expected documents per query");
    run->add_option("--parallelism", run_options.pipeline.parallelism,
                    "max in-flight backend calls");
    run->add_option("--seed", run_options.pipeline.seed, "RNG seed");
    run->add_option("--merge-tail-below", run_options.pipeline.merge_tail_below,
                    "merge a final cluster of at most this size into its predecessor");
    run->add_option("--backend", run_backend, "mock|remote");
    run->add_option("--out", run_out, "output directory");
    run->add_option("--templates", run_templates, "prompt template directory");
    run->add_option("--embeddings", run_embeddings, "JSONL of {key, values} vectors");
    run->add_option("--endpoint", run_options.provider.endpoint_url, "chat completions base URL");
    run->add_option("--model", run_options.provider.model_id, "provider model id");
    run->add_option("--api-key-env", run_options.provider.api_key_env_var,
                    "environment variable holding the API key");
    run->add_option("--max-retries", run_options.provider.max_retries, "retries per call");
    run->add_option("--backoff-base-ms", run_options.provider.backoff_base_ms,
                    "base backoff delay");
    double run_rps = 0.0;
    run->add_option("--rate-limit-rps", run_rps, "global requests-per-second cap");
    double run_temp_det = 0.0, run_temp_samp = 0.7;
    run->add_option("--temperature-deterministic", run_temp_det, "temperature for judging calls");
    run->add_option("--temperature-sampling", run_temp_samp, "temperature for KQA sampling");

    // eval ---------------------------------------------------------------------
    std::string eval_dir, eval_metric = "f1";
    auto* eval = app.add_subcommand("eval", "Aggregate a metric over run results");
    eval->add_option("results", eval_dir, "run directory (or parent of runs)")->required();
    eval->add_option("--metric", eval_metric, "f1|acc|balacc|consistency");

    // cost ---------------------------------------------------------------------
    std::string cost_dir, cost_prices = "0.15,0.60", cost_baseline = "vanilla";
    auto* cost = app.add_subcommand("cost", "Token cost table across methods");
    cost->add_option("results", cost_dir, "run directory (or parent of runs)")->required();
    cost->add_option("--prices", cost_prices, "input,output USD per million tokens");
    cost->add_option("--baseline", cost_baseline, "method to normalize relative cost against");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build_noise->parsed()) {
            return cmd_build_noise(bn_input, bn_output, bn_top_k, bn_noise_rate);
        }
        if (cluster->parsed()) {
            return cmd_cluster(cl_input, cl_output, cl_tau, cl_lambda, cl_strategy, cl_seed,
                               cl_merge_tail, cl_embeddings);
        }
        if (run->parsed()) {
            if (!run_config_file.empty()) {
                // config file values fill in whatever the command line left alone
                const auto file_values = parse_config_file(run_config_file);
                auto absent = [&](const char* flag) { return run->count(flag) == 0; };
                auto from_file = [&](const char* key, const char* flag, auto apply) {
                    auto it = file_values.find(key);
                    if (it != file_values.end() && absent(flag)) apply(it->second);
                };
                from_file("method", "--method", [&](const std::string& v) { run_method = v; });
                from_file("backend", "--backend",
                          [&](const std::string& v) { run_backend = v; });
                from_file("lambda", "--lambda", [&](const std::string& v) { run_lambda = v; });
                from_file("out", "--out", [&](const std::string& v) { run_out = v; });
                from_file("templates", "--templates",
                          [&](const std::string& v) { run_templates = v; });
                from_file("embeddings", "--embeddings",
                          [&](const std::string& v) { run_embeddings = v; });
                from_file("tau", "--tau",
                          [&](const std::string& v) { run_options.pipeline.tau = std::stoi(v); });
                from_file("top_k", "--top-k", [&](const std::string& v) {
                    run_options.pipeline.top_k = std::stoi(v);
                });
                from_file("parallelism", "--parallelism", [&](const std::string& v) {
                    run_options.pipeline.parallelism = std::stoi(v);
                });
                from_file("seed", "--seed", [&](const std::string& v) {
                    run_options.pipeline.seed = std::stoull(v);
                });
                from_file("merge_tail_below", "--merge-tail-below", [&](const std::string& v) {
                    run_options.pipeline.merge_tail_below = std::stoi(v);
                });
                from_file("temperature_deterministic", "--temperature-deterministic",
                          [&](const std::string& v) { run_temp_det = std::stod(v); });
                from_file("temperature_sampling", "--temperature-sampling",
                          [&](const std::string& v) { run_temp_samp = std::stod(v); });
                from_file("endpoint", "--endpoint", [&](const std::string& v) {
                    run_options.provider.endpoint_url = v;
                });
                from_file("model", "--model",
                          [&](const std::string& v) { run_options.provider.model_id = v; });
                from_file("api_key_env", "--api-key-env", [&](const std::string& v) {
                    run_options.provider.api_key_env_var = v;
                });
                from_file("max_retries", "--max-retries", [&](const std::string& v) {
                    run_options.provider.max_retries = std::stoi(v);
                });
                from_file("backoff_base_ms", "--backoff-base-ms", [&](const std::string& v) {
                    run_options.provider.backoff_base_ms = std::stoi(v);
                });
                from_file("rate_limit_rps", "--rate-limit-rps",
                          [&](const std::string& v) { run_rps = std::stod(v); });
            }
            run_options.method = run_method;
            run_options.backend_kind = run_backend;
            run_options.pipeline.lambda = parse_lambda(run_lambda);
            run_options.pipeline.temperature_deterministic = run_temp_det;
            run_options.pipeline.temperature_sampling = run_temp_samp;
            run_options.out_dir = run_out;
            run_options.templates_dir = run_templates;
            if (run_rps > 0.0) run_options.provider.rate_limit_rps = run_rps;
            if (run_embeddings) run_options.embeddings_file = *run_embeddings;
            const RunResult result = run_dataset(run_dataset_path, run_options);
            std::cout << "completed " << (result.total_queries - result.failed_queries) << "/"
                      << result.total_queries << " queries; manifest at "
                      << result.manifest_path.string() << "\n";
            return result.failed_queries > 0 ? 2 : 0;
        }
        if (eval->parsed()) return cmd_eval(eval_dir, eval_metric);
        if (cost->parsed()) return cmd_cost(cost_dir, cost_prices, cost_baseline);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
