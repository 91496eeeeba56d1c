#include "edc2rag/runner.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "edc2rag/clustering.hpp"
#include "edc2rag/compression.hpp"
#include "edc2rag/corpus.hpp"
#include "edc2rag/evaluation.hpp"
#include "edc2rag/generation.hpp"
#include "edc2rag/prompts.hpp"

namespace edc2rag {

namespace {

using nlohmann::ordered_json;

std::string hex64(std::uint64_t value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct EmbeddingStore {
    std::map<std::string, EmbeddingVector> by_key;

    static EmbeddingStore load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open embeddings file: " + path.string());
        EmbeddingStore store;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("key") || !j.contains("values")) {
                throw std::runtime_error("embeddings line " + std::to_string(line_no) +
                                         ": expected {key, values}");
            }
            store.by_key.emplace(j["key"].get<std::string>(),
                                 EmbeddingVector(j["values"].get<std::vector<double>>()));
        }
        return store;
    }

    const EmbeddingVector& get(const std::string& key) const {
        auto it = by_key.find(key);
        if (it == by_key.end()) {
            throw std::runtime_error("missing embedding for key: " + key);
        }
        return it->second;
    }
};

bool is_clustering_method(const std::string& method) {
    return method == "edc2" || method == "edc2-avg" || method == "edc2-random";
}

ordered_json usage_entry(const std::string& purpose, const TokenUsage& usage) {
    ordered_json u;
    u["purpose"] = purpose;
    u["prompt_tokens"] = usage.prompt_tokens;
    u["completion_tokens"] = usage.completion_tokens;
    u["source"] = to_string(usage.source);
    return u;
}

struct QueryOutcome {
    ordered_json record;
    std::optional<Clustering> clustering;
};

class PipelineContext {
public:
    PipelineContext(const RunOptions& options, const TemplateLibrary& templates,
                    ChatBackend& chat, EmbeddingBackend* embedder,
                    const EmbeddingStore* embedding_store)
        : options_(options), templates_(templates), chat_(chat), embedder_(embedder),
          embedding_store_(embedding_store) {}

    QueryOutcome run_query(const DatasetRow& row) const {
        const RetrievedSet docs = row.retrieved();
        const auto started = std::chrono::steady_clock::now();

        UsageTapChatBackend tap(chat_);
        QueryOutcome outcome;
        std::vector<ordered_json> usage_entries;
        std::vector<std::string> context_blocks;
        std::vector<CandidateAnswer> candidates;
        std::optional<FinalAnswer> final_answer;
        std::optional<Verdict> verdict;

        GenerationOptions gen;
        gen.parallelism = options_.pipeline.parallelism;
        gen.temperature_deterministic = options_.pipeline.temperature_deterministic;
        gen.temperature_sampling = options_.pipeline.temperature_sampling;

        if (is_clustering_method(options_.method)) {
            const Clustering clustering = cluster(row, docs);
            outcome.clustering = clustering;

            CompressionOptions copts;
            copts.parallelism = options_.pipeline.parallelism;
            copts.temperature = row.query.task == TaskKind::KQA
                                    ? options_.pipeline.temperature_sampling
                                    : options_.pipeline.temperature_deterministic;
            const auto summaries =
                summarize_clusters(clustering, row.query, docs, templates_, tap, copts);
            for (const auto& s : summaries) {
                usage_entries.push_back(usage_entry("compress", s.usage));
            }
            context_blocks = apply_fallback(summaries, clustering, docs);

            if (row.query.task == TaskKind::KQA) {
                for (const auto& s : summaries) {
                    if (s.failed || s.empty_extract) continue;
                    if (auto candidate = candidate_from_response(s.cluster_index, s.text, gen)) {
                        candidates.push_back(std::move(*candidate));
                    }
                }
                if (candidates.empty()) {
                    throw std::runtime_error("no cluster produced an answer candidate");
                }
                tap.clear();
                tap.set_phase("select");
                final_answer = kqa_select(candidates, row.query, templates_, tap, gen);
                for (const auto& e : tap.entries()) {
                    usage_entries.push_back(usage_entry(e.purpose, e.usage));
                }
            } else {
                tap.clear();
                verdict = final_verdict(row, context_blocks, tap, gen, usage_entries);
            }
        } else if (options_.method == "vanilla") {
            for (const auto& doc : docs.documents()) context_blocks.push_back(doc.text);
            if (row.query.task == TaskKind::KQA) {
                tap.set_phase("answer");
                final_answer = vanilla_ralm(row.query, docs, templates_, tap, gen);
                for (const auto& e : tap.entries()) {
                    usage_entries.push_back(usage_entry(e.purpose, e.usage));
                }
            } else {
                verdict = final_verdict(row, context_blocks, tap, gen, usage_entries);
            }
        } else if (options_.method == "chunk") {
            CompressionOptions copts;
            copts.parallelism = options_.pipeline.parallelism;
            copts.temperature = options_.pipeline.temperature_deterministic;
            const auto summaries = compress_documents(row.query, docs, templates_, tap, copts);
            for (std::size_t i = 0; i < summaries.size(); ++i) {
                usage_entries.push_back(usage_entry("chunk-compress", summaries[i].usage));
                const ClusterSummary& s = summaries[i];
                const bool poor = s.failed || s.empty_extract || s.text.empty();
                context_blocks.push_back(poor ? docs.documents()[i].text : s.text);
            }
            if (row.query.task == TaskKind::KQA) {
                tap.clear();
                tap.set_phase("answer");
                final_answer = answer_over_blocks(row.query, context_blocks, tap, gen);
                for (const auto& e : tap.entries()) {
                    usage_entries.push_back(usage_entry(e.purpose, e.usage));
                }
            } else {
                tap.clear();
                verdict = final_verdict(row, context_blocks, tap, gen, usage_entries);
            }
        } else {
            throw std::invalid_argument("unknown method: " + options_.method);
        }

        long long wall_ms;
        if (chat_.deterministic()) {
            wall_ms = 0;  // logical time keeps mock runs byte-reproducible
        } else {
            wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - started)
                          .count();
        }

        ordered_json record;
        record["query_id"] = row.query.id;
        record["method"] = options_.method;
        if (final_answer) {
            record["final_answer"] = {{"reasoning", final_answer->reasoning},
                                      {"selected", final_answer->selected}};
        } else if (verdict) {
            record["verdict"] = {{"kind", to_string(verdict->kind)},
                                 {"reasoning", verdict->reasoning}};
        }
        record["candidates"] = ordered_json::array();
        for (const auto& c : candidates) {
            record["candidates"].push_back({{"cluster_index", c.cluster_index},
                                            {"answer_text", c.answer_text},
                                            {"evidence_text", c.evidence_text}});
        }
        record["context_blocks"] = context_blocks;
        record["usage"] = usage_entries;
        record["wall_time_ms"] = wall_ms;
        outcome.record = std::move(record);
        return outcome;
    }

private:
    Clustering cluster(const DatasetRow& row, const RetrievedSet& docs) const {
        const int n = static_cast<int>(docs.size());
        const int tau = std::min(options_.pipeline.tau, n);
        const SizePlan plan = plan_sizes(n, tau, options_.pipeline.lambda,
                                         options_.pipeline.merge_tail_below);
        if (options_.method == "edc2-avg") {
            return average_cluster(docs, static_cast<int>(plan.sizes.size()));
        }
        if (options_.method == "edc2-random") {
            const auto seed = SplitRng(options_.pipeline.seed)
                                  .split("query:" + row.query.id)
                                  .next_u64();
            return random_cluster(docs, plan, seed);
        }

        EmbeddingMap doc_embeddings;
        EmbeddingVector query_embedding;
        if (embedding_store_ != nullptr) {
            for (const auto& doc : docs.documents()) {
                doc_embeddings.emplace(doc.id, embedding_store_->get(doc.id));
            }
            query_embedding = embedding_store_->get(row.query.id);
        } else {
            std::vector<std::string> texts;
            texts.reserve(docs.size() + 1);
            texts.push_back(row.query.text);
            for (const auto& doc : docs.documents()) texts.push_back(doc.text);
            const auto vectors = embedder_->embed(texts);
            query_embedding = vectors.front();
            for (std::size_t i = 0; i < docs.size(); ++i) {
                doc_embeddings.emplace(docs.documents()[i].id, vectors[i + 1]);
            }
        }
        return dynamic_cluster(docs, doc_embeddings, query_embedding, tau,
                               options_.pipeline.lambda, options_.pipeline.merge_tail_below);
    }

    FinalAnswer answer_over_blocks(const Query& query, const std::vector<std::string>& blocks,
                                   ChatBackend& backend, const GenerationOptions& gen) const {
        std::string context;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            context += "[" + std::to_string(i + 1) + "] " + blocks[i] + "\n";
        }
        const PromptTemplate& tmpl = templates_.get("kqa-summarize");
        ChatRequest request;
        request.user = render_prompt(tmpl, {{"question", query.text}, {"docs", context}});
        request.temperature = gen.temperature_deterministic;
        const ChatResponse response = backend.chat(request);
        return FinalAnswer{"", response.text};
    }

    Verdict final_verdict(const DatasetRow& row, const std::vector<std::string>& blocks,
                          UsageTapChatBackend& tap, const GenerationOptions& gen,
                          std::vector<ordered_json>& usage_entries) const {
        tap.set_phase("verdict");
        Verdict verdict{VerdictKind::Factual, ""};
        if (row.query.task == TaskKind::HaluEvalChoice) {
            std::string knowledge;
            for (const auto& block : blocks) {
                if (!knowledge.empty()) knowledge += "\n";
                knowledge += block;
            }
            verdict = halueval_choice(knowledge, row.query.text, row.answer1, row.answer2,
                                      templates_, tap, gen);
        } else {
            const FactVariant variant =
                row.query.person.empty() ? FactVariant::FELM : FactVariant::WikiBio;
            verdict = factcheck_verdict(row.query, blocks, templates_, tap, variant, gen);
        }
        for (const auto& e : tap.entries()) {
            usage_entries.push_back(usage_entry(e.purpose, e.usage));
        }
        return verdict;
    }

    const RunOptions& options_;
    const TemplateLibrary& templates_;
    ChatBackend& chat_;
    EmbeddingBackend* embedder_;
    const EmbeddingStore* embedding_store_;
};

double spec_mix(const DatasetRow& row) {
    if (row.spec.contains("noise_rate")) return row.spec["noise_rate"].get<double>();
    if (row.spec.contains("r")) return row.spec["r"].get<double>();
    return 0.0;
}

int spec_top_k(const DatasetRow& row) {
    if (row.spec.contains("top_k")) return row.spec["top_k"].get<int>();
    return static_cast<int>(row.docs.size());
}

Strategy method_strategy(const std::string& method) {
    if (method == "edc2-avg") return Strategy::Average;
    if (method == "edc2-random") return Strategy::Random;
    return Strategy::Dynamic;
}

ordered_json config_snapshot(const RunOptions& options) {
    ordered_json config;
    config["method"] = options.method;
    config["backend"] = options.backend_kind;
    config["tau"] = options.pipeline.tau;
    if (options.pipeline.lambda) {
        config["lambda"] = *options.pipeline.lambda;
    } else {
        config["lambda"] = "unbounded";
    }
    config["top_k"] = options.pipeline.top_k;
    config["strategy"] = to_string(method_strategy(options.method));
    config["seed"] = options.pipeline.seed;
    config["parallelism"] = options.pipeline.parallelism;
    config["temperature_deterministic"] = options.pipeline.temperature_deterministic;
    config["temperature_sampling"] = options.pipeline.temperature_sampling;
    config["merge_tail_below"] = options.pipeline.merge_tail_below;
    config["templates_dir"] = options.templates_dir.string();
    if (options.backend_kind == "remote") {
        // The key itself is read from the environment at call time and never
        // written anywhere; only the variable name is recorded.
        config["provider"] = {{"endpoint_url", options.provider.endpoint_url},
                              {"api_key_env_var", options.provider.api_key_env_var},
                              {"model_id", options.provider.model_id},
                              {"max_retries", options.provider.max_retries},
                              {"backoff_base_ms", options.provider.backoff_base_ms}};
        if (options.provider.rate_limit_rps) {
            config["provider"]["rate_limit_rps"] = *options.provider.rate_limit_rps;
        }
    }
    return config;
}

}  // namespace

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot digest missing file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return hex64(fnv1a64(buf.str()));
}

std::string sanitize_file_stem(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? "query" : out;
}

RunResult run_dataset(const std::filesystem::path& dataset_path, const RunOptions& options) {
    options.pipeline.validate();
    const auto rows = read_dataset(dataset_path);
    const TemplateLibrary templates = TemplateLibrary::load(options.templates_dir);

    std::unique_ptr<ChatBackend> mock_chat;
    std::unique_ptr<ChatBackend> http_chat;
    std::unique_ptr<RetryingChatBackend> retrying;
    std::unique_ptr<EmbeddingBackend> embedder;
    std::shared_ptr<RateLimiter> limiter;
    static SystemClock system_clock;

    ChatBackend* chat = nullptr;
    if (options.backend_kind == "mock") {
        mock_chat = std::make_unique<ExtractiveMockChatBackend>();
        chat = mock_chat.get();
        embedder = std::make_unique<HashEmbeddingBackend>(
            SplitRng(options.pipeline.seed).split("embed").next_u64());
    } else if (options.backend_kind == "remote") {
        http_chat = std::make_unique<HttpChatBackend>(options.provider);
        if (options.provider.rate_limit_rps) {
            limiter = std::make_shared<RateLimiter>(*options.provider.rate_limit_rps,
                                                    system_clock);
        }
        retrying = std::make_unique<RetryingChatBackend>(*http_chat, options.provider,
                                                         system_clock, options.pipeline.seed,
                                                         limiter);
        chat = retrying.get();
        embedder = std::make_unique<HttpEmbeddingBackend>(options.provider);
    } else {
        throw std::invalid_argument("unknown backend kind: " + options.backend_kind);
    }

    std::optional<EmbeddingStore> store;
    if (options.embeddings_file) {
        store = EmbeddingStore::load(*options.embeddings_file);
    }

    std::filesystem::create_directories(options.out_dir);
    std::filesystem::create_directories(options.out_dir / "records");
    if (is_clustering_method(options.method)) {
        std::filesystem::create_directories(options.out_dir / "clusters");
    }

    const std::string started_at = iso_now();

    // Input snapshot makes the output directory self-contained for eval/cost.
    write_dataset(options.out_dir / "queries.jsonl", rows);

    PipelineContext context(options, templates, *chat,
                            embedder ? embedder.get() : nullptr,
                            store ? &*store : nullptr);

    ordered_json results = ordered_json::array();
    std::vector<MetricSample> metric_samples;
    std::ofstream failures_out;
    int failed = 0;

    for (const auto& row : rows) {
        const std::string stem = sanitize_file_stem(row.query.id);
        try {
            QueryOutcome outcome = context.run_query(row);
            const auto record_path = options.out_dir / "records" / (stem + ".json");
            {
                std::ofstream out(record_path, std::ios::binary | std::ios::trunc);
                out << outcome.record.dump(2) << "\n";
            }
            if (outcome.clustering) {
                std::ofstream out(options.out_dir / "clusters" / (stem + ".json"),
                                  std::ios::binary | std::ios::trunc);
                out << clustering_to_json(*outcome.clustering).dump(2) << "\n";
            }
            results.push_back({{"query_id", row.query.id},
                               {"record", "records/" + stem + ".json"},
                               {"digest", file_digest(record_path)}});

            if (row.query.task == TaskKind::KQA && outcome.record.contains("final_answer") &&
                !row.query.gold_answers.empty()) {
                MetricSample sample;
                sample.method = options.method;
                sample.top_k = spec_top_k(row);
                sample.mix = spec_mix(row);
                sample.task = "kqa";
                sample.value =
                    token_f1(outcome.record["final_answer"]["selected"].get<std::string>(),
                             row.query.gold_answers)
                        .f1;
                metric_samples.push_back(sample);
            }
        } catch (const std::exception& e) {
            ++failed;
            if (!failures_out.is_open()) {
                failures_out.open(options.out_dir / "failures.jsonl",
                                  std::ios::binary | std::ios::trunc);
            }
            ordered_json failure;
            failure["query_id"] = row.query.id;
            failure["error"] = e.what();
            failures_out << failure.dump() << "\n";
            results.push_back({{"query_id", row.query.id}, {"failed", e.what()}});
        }
    }

    if (!metric_samples.empty()) {
        const auto cells = aggregate(metric_samples);
        std::ofstream csv(options.out_dir / "report.csv", std::ios::binary | std::ios::trunc);
        csv << summary_csv(cells);
        std::ofstream txt(options.out_dir / "report.txt", std::ios::binary | std::ios::trunc);
        txt << summary_table(cells);
    }

    ordered_json manifest;
    manifest["config"] = config_snapshot(options);
    manifest["inputs"] = {{"dataset", {{"path", dataset_path.string()},
                                       {"fnv1a64", file_digest(dataset_path)}}}};
    manifest["seed"] = options.pipeline.seed;
    manifest["results"] = results;
    manifest["started_at"] = started_at;
    manifest["finished_at"] = iso_now();

    RunResult run_result;
    run_result.total_queries = static_cast<int>(rows.size());
    run_result.failed_queries = failed;
    run_result.manifest_path = options.out_dir / "manifest.json";
    {
        std::ofstream out(run_result.manifest_path, std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << "\n";
    }
    return run_result;
}

}  // namespace edc2rag
