#include "edc2rag/generation.hpp"

#include <json.hpp>

#include <map>
#include <sstream>
#include <stdexcept>

#include "parallel_util.hpp"
#include "text_util.hpp"

namespace edc2rag {

const char* to_string(VerdictKind kind) {
    switch (kind) {
        case VerdictKind::Factual: return "Factual";
        case VerdictKind::Nonfactual: return "Nonfactual";
        case VerdictKind::Answer1: return "Answer 1";
        case VerdictKind::Answer2: return "Answer 2";
    }
    return "Factual";
}

std::optional<std::string> parse_selected_answer(const std::string& response) {
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        const std::string trimmed = textutil::trim(line);
        constexpr const char* kMarker = "Selected_Answer:";
        if (trimmed.rfind(kMarker, 0) == 0) {
            return textutil::trim(trimmed.substr(std::string(kMarker).size()));
        }
    }
    return std::nullopt;
}

bool is_refusal(const std::string& answer_text, const GenerationOptions& options) {
    const std::string normalized = textutil::normalized_text(answer_text);
    if (normalized.empty()) return true;
    for (const auto& pattern : options.refusal_patterns) {
        if (normalized.find(pattern) != std::string::npos) return true;
    }
    return false;
}

namespace {

std::string reasoning_before_marker(const std::string& response, const char* marker) {
    const auto pos = response.find(marker);
    return textutil::trim(pos == std::string::npos ? response : response.substr(0, pos));
}

// Splits an "Answer: ... Evidence: ..." style response; whole text is the
// answer when no such structure exists.
void split_answer_evidence(const std::string& response, CandidateAnswer& out) {
    std::istringstream in(response);
    std::string line;
    std::string answer, evidence;
    std::string* sink = nullptr;
    while (std::getline(in, line)) {
        std::string trimmed = textutil::trim(line);
        if (trimmed.rfind("Answer:", 0) == 0) {
            answer += textutil::trim(trimmed.substr(7));
            sink = &answer;
            continue;
        }
        if (trimmed.rfind("Evidence:", 0) == 0) {
            evidence += textutil::trim(trimmed.substr(9));
            sink = &evidence;
            continue;
        }
        if (sink != nullptr && !trimmed.empty()) {
            *sink += " " + trimmed;
        }
    }
    if (answer.empty()) {
        out.answer_text = textutil::trim(response);
        out.evidence_text = "";
    } else {
        out.answer_text = answer;
        out.evidence_text = evidence;
    }
}

}  // namespace

std::optional<CandidateAnswer> candidate_from_response(int cluster_index,
                                                       const std::string& response_text,
                                                       const GenerationOptions& options) {
    if (is_empty_extract(response_text)) return std::nullopt;
    CandidateAnswer candidate;
    candidate.cluster_index = cluster_index;
    split_answer_evidence(response_text, candidate);
    if (is_refusal(candidate.answer_text, options)) return std::nullopt;
    return candidate;
}

std::vector<CandidateAnswer> kqa_answer_clusters(const Clustering& clustering, const Query& query,
                                                 const RetrievedSet& docs,
                                                 const TemplateLibrary& templates,
                                                 ChatBackend& backend,
                                                 const GenerationOptions& options) {
    if (query.task != TaskKind::KQA) {
        throw std::invalid_argument("kqa_answer_clusters requires a KQA query");
    }
    const PromptTemplate& tmpl = templates.get("kqa-summarize");

    std::vector<std::optional<CandidateAnswer>> slots(clustering.clusters.size());
    detail::parallel_for_indexed(
        clustering.clusters.size(), static_cast<std::size_t>(options.parallelism),
        [&](std::size_t i) {
            const Cluster& cluster = clustering.clusters[i];
            try {
                ChatRequest request;
                request.user = render_prompt(tmpl, {{"question", query.text},
                                                    {"docs", cluster_docs_block(cluster, docs)}});
                request.temperature = options.temperature_sampling;
                const ChatResponse response = backend.chat(request);
                slots[i] = candidate_from_response(cluster.index, response.text, options);
            } catch (const std::exception&) {
                // candidate omitted; selection proceeds with the rest
            }
        });

    std::vector<CandidateAnswer> candidates;
    for (auto& slot : slots) {
        if (slot) candidates.push_back(std::move(*slot));
    }
    if (candidates.empty()) {
        throw std::runtime_error("no cluster produced an answer candidate");
    }
    return candidates;
}

FinalAnswer kqa_select(const std::vector<CandidateAnswer>& candidates, const Query& query,
                       const TemplateLibrary& templates, ChatBackend& backend,
                       const GenerationOptions& options) {
    if (candidates.empty()) throw std::invalid_argument("kqa_select needs >= 1 candidate");
    if (candidates.size() == 1) {
        return FinalAnswer{"single candidate", candidates.front().answer_text};
    }

    nlohmann::json answers = nlohmann::json::array();
    for (const auto& c : candidates) answers.push_back(c.answer_text);

    const PromptTemplate& tmpl = templates.get("kqa-select");
    ChatRequest request;
    request.user = render_prompt(tmpl, {{"answers", answers.dump()}, {"question", query.text}});
    request.temperature = options.temperature_deterministic;

    for (int attempt = 0; attempt < 2; ++attempt) {
        const ChatResponse response = backend.chat(request);
        if (auto selected = parse_selected_answer(response.text)) {
            return FinalAnswer{reasoning_before_marker(response.text, "Selected_Answer:"),
                               *selected};
        }
    }
    throw std::runtime_error("selection response carried no Selected_Answer line");
}

namespace {

std::optional<VerdictKind> parse_factual(const std::string& response) {
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        std::string trimmed = textutil::trim(line);
        if (trimmed.rfind("Answer:", 0) == 0 || trimmed.rfind("##Answer##:", 0) == 0) {
            const std::string value = textutil::normalized_text(trimmed.substr(trimmed.find(':') + 1));
            if (value == "factual") return VerdictKind::Factual;
            if (value == "nonfactual") return VerdictKind::Nonfactual;
        }
    }
    return std::nullopt;
}

std::optional<VerdictKind> parse_choice(const std::string& response) {
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        std::string trimmed = textutil::trim(line);
        const auto pos = trimmed.find("#Choice#:");
        if (pos == std::string::npos) continue;
        const std::string value = textutil::normalized_text(trimmed.substr(pos + 9));
        if (value == "answer 1") return VerdictKind::Answer1;
        if (value == "answer 2") return VerdictKind::Answer2;
    }
    return std::nullopt;
}

std::string numbered_blocks(const std::vector<std::string>& blocks) {
    std::string out;
    int position = 1;
    for (const auto& block : blocks) {
        out += "[" + std::to_string(position++) + "] " + block + "\n";
    }
    return out;
}

}  // namespace

Verdict factcheck_verdict(const Query& statement, const std::vector<std::string>& context_blocks,
                          const TemplateLibrary& templates, ChatBackend& backend,
                          FactVariant variant, const GenerationOptions& options) {
    const PromptTemplate& tmpl =
        templates.get(variant == FactVariant::WikiBio ? "wikibio-eval" : "felm-eval");
    std::map<std::string, std::string> bindings = {
        {"statement", statement.text}, {"docs", numbered_blocks(context_blocks)}};
    if (tmpl.required_slots.count("person")) {
        bindings["person"] = statement.person.empty() ? "the subject" : statement.person;
    }

    ChatRequest request;
    request.user = render_prompt(tmpl, bindings);
    request.temperature = options.temperature_deterministic;

    for (int attempt = 0; attempt < 2; ++attempt) {
        const ChatResponse response = backend.chat(request);
        if (auto kind = parse_factual(response.text)) {
            return Verdict{*kind, reasoning_before_marker(response.text, "Answer:")};
        }
    }
    throw std::runtime_error("verdict response carried no parsable Answer field");
}

Verdict halueval_choice(const std::string& knowledge, const std::string& question,
                        const std::string& answer1, const std::string& answer2,
                        const TemplateLibrary& templates, ChatBackend& backend,
                        const GenerationOptions& options) {
    if (answer1.empty() || answer2.empty()) {
        throw std::invalid_argument("halueval_choice requires two non-empty answers");
    }
    const PromptTemplate& tmpl = templates.get("halueval-eval");
    ChatRequest request;
    request.user = render_prompt(tmpl, {{"knowledge", knowledge},
                                        {"question", question},
                                        {"answer_1", answer1},
                                        {"answer_2", answer2}});
    request.temperature = options.temperature_deterministic;

    for (int attempt = 0; attempt < 2; ++attempt) {
        const ChatResponse response = backend.chat(request);
        if (auto kind = parse_choice(response.text)) {
            return Verdict{*kind, reasoning_before_marker(response.text, "#Choice#:")};
        }
    }
    throw std::runtime_error("choice response carried no parsable #Choice# field");
}

std::string vanilla_context(const RetrievedSet& docs) {
    std::string block;
    int position = 1;
    for (const auto& doc : docs.documents()) {
        block += "[" + std::to_string(position++) + "] " + doc.text + "\n";
    }
    return block;
}

FinalAnswer vanilla_ralm(const Query& query, const RetrievedSet& docs,
                         const TemplateLibrary& templates, ChatBackend& backend,
                         const GenerationOptions& options) {
    const PromptTemplate& tmpl = templates.get("kqa-summarize");
    ChatRequest request;
    request.user =
        render_prompt(tmpl, {{"question", query.text}, {"docs", vanilla_context(docs)}});
    request.temperature = options.temperature_deterministic;
    const ChatResponse response = backend.chat(request);
    const std::string answer = textutil::trim(response.text);
    if (answer.empty()) throw std::runtime_error("empty answer from backend");
    return FinalAnswer{"", answer};
}

FinalAnswer chunk_compression(const Query& query, const RetrievedSet& docs,
                              const TemplateLibrary& templates, ChatBackend& backend,
                              const GenerationOptions& options) {
    CompressionOptions copts;
    copts.parallelism = options.parallelism;
    copts.temperature = options.temperature_deterministic;
    const auto summaries = compress_documents(query, docs, templates, backend, copts);

    std::string context;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const ClusterSummary& s = summaries[i];
        const bool poor = s.failed || s.empty_extract || textutil::trim(s.text).empty();
        const std::string& piece = poor ? docs.documents()[i].text : s.text;
        context += "[" + std::to_string(i + 1) + "] " + piece + "\n";
    }

    const PromptTemplate& answer_tmpl = templates.get("kqa-summarize");
    ChatRequest request;
    request.user = render_prompt(answer_tmpl, {{"question", query.text}, {"docs", context}});
    request.temperature = options.temperature_deterministic;
    const ChatResponse response = backend.chat(request);
    const std::string answer = textutil::trim(response.text);
    if (answer.empty()) throw std::runtime_error("empty answer from backend");
    return FinalAnswer{"", answer};
}

}  // namespace edc2rag
