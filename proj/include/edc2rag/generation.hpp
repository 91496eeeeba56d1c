#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edc2rag/backends.hpp"
#include "edc2rag/clustering.hpp"
#include "edc2rag/compression.hpp"
#include "edc2rag/core.hpp"
#include "edc2rag/prompts.hpp"

namespace edc2rag {

struct CandidateAnswer {
    int cluster_index = 0;
    std::string answer_text;
    std::string evidence_text;
};

struct FinalAnswer {
    std::string reasoning;
    std::string selected;
};

enum class VerdictKind { Factual, Nonfactual, Answer1, Answer2 };

const char* to_string(VerdictKind kind);

struct Verdict {
    VerdictKind kind;
    std::string reasoning;
};

enum class FactVariant { FELM, WikiBio };

struct GenerationOptions {
    int parallelism = 1;
    double temperature_deterministic = 0.0;
    double temperature_sampling = 0.7;
    /// Candidates whose normalized answer contains one of these are treated
    /// as refusals and dropped before selection.
    std::vector<std::string> refusal_patterns = {
        "no content to extract", "cannot answer", "cannot be answered", "unable to answer",
        "i don t know", "no answer"};
};

/// The remainder of the first "Selected_Answer:" line, trimmed, or nullopt.
std::optional<std::string> parse_selected_answer(const std::string& response);

bool is_refusal(const std::string& answer_text, const GenerationOptions& options);

/// Turns one per-cluster response into a candidate, splitting an
/// "Answer:/Evidence:" structure when present. Refusals yield nullopt.
std::optional<CandidateAnswer> candidate_from_response(int cluster_index,
                                                       const std::string& response_text,
                                                       const GenerationOptions& options);

/// One answer-with-evidence candidate per cluster (sampling temperature),
/// ordered by cluster index. Per-cluster failures and refusals drop the
/// candidate; throws only when every cluster fails to produce one.
std::vector<CandidateAnswer> kqa_answer_clusters(const Clustering& clustering, const Query& query,
                                                 const RetrievedSet& docs,
                                                 const TemplateLibrary& templates,
                                                 ChatBackend& backend,
                                                 const GenerationOptions& options);

/// Consensus selection over candidate answers. Re-prompts once when the
/// response carries no Selected_Answer line, then errors.
FinalAnswer kqa_select(const std::vector<CandidateAnswer>& candidates, const Query& query,
                       const TemplateLibrary& templates, ChatBackend& backend,
                       const GenerationOptions& options);

/// Factual/Nonfactual verdict for a statement given context blocks.
Verdict factcheck_verdict(const Query& statement, const std::vector<std::string>& context_blocks,
                          const TemplateLibrary& templates, ChatBackend& backend,
                          FactVariant variant, const GenerationOptions& options);

/// Answer 1 / Answer 2 choice given knowledge. Any other model output after
/// one re-prompt is an error.
Verdict halueval_choice(const std::string& knowledge, const std::string& question,
                        const std::string& answer1, const std::string& answer2,
                        const TemplateLibrary& templates, ChatBackend& backend,
                        const GenerationOptions& options);

/// Standard RAG baseline: one call over all documents in rank order.
FinalAnswer vanilla_ralm(const Query& query, const RetrievedSet& docs,
                         const TemplateLibrary& templates, ChatBackend& backend,
                         const GenerationOptions& options);

/// Per-document compression baseline: k compression calls (failures fall
/// back to the original document) followed by one answer call.
FinalAnswer chunk_compression(const Query& query, const RetrievedSet& docs,
                              const TemplateLibrary& templates, ChatBackend& backend,
                              const GenerationOptions& options);

/// All documents in rank order as a single numbered block (the vanilla
/// context; also the comparison basis for compressed contexts).
std::string vanilla_context(const RetrievedSet& docs);

}  // namespace edc2rag
