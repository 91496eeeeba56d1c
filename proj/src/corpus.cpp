#include "edc2rag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "edc2rag/evaluation.hpp"

namespace edc2rag {

namespace {

std::string joined_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

}  // namespace

bool label_has_answer(const Document& doc, const std::vector<std::string>& gold_answers) {
    if (gold_answers.empty()) {
        throw std::invalid_argument("label_has_answer requires at least one gold answer");
    }
    const std::string text = joined_tokens(normalize_answer(doc.text));
    for (const auto& gold : gold_answers) {
        const std::string needle = joined_tokens(normalize_answer(gold));
        if (!needle.empty() && text.find(needle) != std::string::npos) return true;
    }
    return false;
}

LabeledPool label_pool(const DatasetRow& row) {
    LabeledPool pool;
    pool.query_id = row.query.id;
    pool.query = row.query;
    for (Document doc : row.docs) {
        if (label_has_answer(doc, row.query.gold_answers)) {
            doc.label = DocLabel::HasAnswer;
            pool.has_answer_docs.push_back(std::move(doc));
        } else {
            doc.label = DocLabel::Noise;
            pool.noise_docs.push_back(std::move(doc));
        }
    }
    return pool;
}

std::vector<std::string> filter_eligible(const std::vector<LabeledPool>& pools, int min_each) {
    std::vector<std::string> kept;
    for (const auto& pool : pools) {
        if (static_cast<int>(pool.has_answer_docs.size()) >= min_each &&
            static_cast<int>(pool.noise_docs.size()) >= min_each) {
            kept.push_back(pool.query_id);
        }
    }
    return kept;
}

RetrievedSet build_noisy_set(const LabeledPool& pool, const NoiseSpec& spec) {
    if (spec.top_k < 1) throw std::invalid_argument("top_k must be >= 1");
    if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0) {
        throw std::invalid_argument("noise_rate must be in [0, 1]");
    }
    const int noise_count =
        static_cast<int>(std::floor(spec.top_k * spec.noise_rate + 0.5));
    const int answer_count = spec.top_k - noise_count;
    if (noise_count > static_cast<int>(pool.noise_docs.size())) {
        throw std::runtime_error("query " + pool.query_id + ": needs " +
                                 std::to_string(noise_count) + " noise documents but pool has " +
                                 std::to_string(pool.noise_docs.size()));
    }
    if (answer_count > static_cast<int>(pool.has_answer_docs.size())) {
        throw std::runtime_error("query " + pool.query_id + ": needs " +
                                 std::to_string(answer_count) +
                                 " has_answer documents but pool has " +
                                 std::to_string(pool.has_answer_docs.size()));
    }

    std::vector<Document> mixed;
    mixed.insert(mixed.end(), pool.noise_docs.begin(), pool.noise_docs.begin() + noise_count);
    mixed.insert(mixed.end(), pool.has_answer_docs.begin(),
                 pool.has_answer_docs.begin() + answer_count);
    std::sort(mixed.begin(), mixed.end(),
              [](const Document& a, const Document& b) { return a.rank < b.rank; });
    return RetrievedSet(pool.query_id, std::move(mixed));
}

RetrievedSet build_redundant_set(const RetrievedSet& top_docs, const RedundancySpec& spec,
                                 ChatBackend& backend, std::uint64_t seed) {
    const int n = static_cast<int>(top_docs.size());
    if (n != spec.base_k) {
        throw std::invalid_argument("build_redundant_set expects exactly base_k documents");
    }
    if (spec.kept < 1 || spec.kept > spec.base_k) {
        throw std::invalid_argument("kept must be in [1, base_k]");
    }
    if (spec.kept == spec.base_k) return top_docs;

    SplitRng rng = SplitRng(seed).split("redundancy");
    std::vector<Document> out(top_docs.documents().begin(),
                              top_docs.documents().begin() + spec.kept);
    for (int slot = spec.kept; slot < spec.base_k; ++slot) {
        const Document& replaced = top_docs.documents()[static_cast<std::size_t>(slot)];
        const Document& source =
            out[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(spec.kept)))];
        ChatRequest request;
        request.user = "##Instruction##:\nRewrite the following passage in different words, "
                       "preserving every fact.\n##Passage##:\n" +
                       source.text + "\n##Rewritten##:\n";
        const ChatResponse response = backend.chat(request);  // failures propagate
        Document rewritten;
        rewritten.id = replaced.id + "-rw";
        rewritten.text = response.text;
        rewritten.rank = replaced.rank;
        rewritten.label = DocLabel::Rewritten;
        out.push_back(std::move(rewritten));
    }
    std::sort(out.begin(), out.end(),
              [](const Document& a, const Document& b) { return a.rank < b.rank; });
    return RetrievedSet(top_docs.query_id(), std::move(out));
}

// --- JSONL -------------------------------------------------------------------

DatasetRow parse_dataset_row(const std::string& line, std::size_t line_no) {
    auto fail = [line_no](const std::string& why) -> std::runtime_error {
        return std::runtime_error("line " + std::to_string(line_no) + ": " + why);
    };
    const auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw fail("malformed JSON object");

    DatasetRow row;
    try {
        row.query.id = j.at("query_id").get<std::string>();
        row.query.text = j.at("question").get<std::string>();
        if (j.contains("answers")) {
            row.query.gold_answers = j["answers"].get<std::vector<std::string>>();
        }
        row.query.task = j.contains("task")
                             ? task_from_string(j["task"].get<std::string>())
                             : TaskKind::KQA;
        if (j.contains("person")) row.query.person = j["person"].get<std::string>();
        if (j.contains("gold_label")) row.gold_label = j["gold_label"].get<std::string>();
        if (j.contains("knowledge")) row.knowledge = j["knowledge"].get<std::string>();
        if (j.contains("answer1")) row.answer1 = j["answer1"].get<std::string>();
        if (j.contains("answer2")) row.answer2 = j["answer2"].get<std::string>();
        if (j.contains("spec")) row.spec = j["spec"];

        if (row.query.task == TaskKind::KQA && row.query.gold_answers.empty()) {
            throw fail("KQA query " + row.query.id + " needs at least one gold answer");
        }
        if (!j.contains("docs") || !j["docs"].is_array() || j["docs"].empty()) {
            throw fail("missing docs array");
        }
        for (const auto& d : j["docs"]) {
            Document doc;
            doc.id = d.at("id").get<std::string>();
            doc.text = d.at("text").get<std::string>();
            doc.rank = d.at("rank").get<int>();
            if (d.contains("label")) {
                doc.label = doc_label_from_string(d["label"].get<std::string>());
            }
            if (d.contains("score")) row.scores[doc.id] = d["score"].get<double>();
            row.docs.push_back(std::move(doc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw fail(e.what());
    }
    return row;
}

std::string serialize_dataset_row(const DatasetRow& row) {
    nlohmann::ordered_json j;
    j["query_id"] = row.query.id;
    j["question"] = row.query.text;
    j["answers"] = row.query.gold_answers;
    if (row.query.task != TaskKind::KQA) j["task"] = to_string(row.query.task);
    if (!row.query.person.empty()) j["person"] = row.query.person;
    if (row.gold_label) j["gold_label"] = *row.gold_label;
    if (!row.knowledge.empty()) j["knowledge"] = row.knowledge;
    if (!row.answer1.empty()) j["answer1"] = row.answer1;
    if (!row.answer2.empty()) j["answer2"] = row.answer2;
    if (!row.spec.is_null() && !row.spec.empty()) j["spec"] = row.spec;
    j["docs"] = nlohmann::ordered_json::array();
    for (const auto& doc : row.docs) {
        nlohmann::ordered_json d;
        d["id"] = doc.id;
        d["text"] = doc.text;
        d["rank"] = doc.rank;
        auto score = row.scores.find(doc.id);
        if (score != row.scores.end()) d["score"] = score->second;
        d["label"] = to_string(doc.label);
        j["docs"].push_back(std::move(d));
    }
    return j.dump();
}

std::vector<DatasetRow> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
    std::vector<DatasetRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(parse_dataset_row(line, line_no));
    }
    if (rows.empty()) throw std::runtime_error("dataset is empty: " + path.string());
    return rows;
}

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset: " + path.string());
    for (const auto& row : rows) {
        out << serialize_dataset_row(row) << "\n";
    }
}

}  // namespace edc2rag
