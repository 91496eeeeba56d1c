#include "edc2rag/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "edc2rag/prompts.hpp"
#include "text_util.hpp"

namespace edc2rag {

const char* to_string(UsageSource s) {
    return s == UsageSource::BackendReported ? "backend_reported" : "approximate";
}

long long approx_token_count(const std::string& text) {
    return static_cast<long long>((text.size() + 3) / 4);
}

std::vector<EmbeddingVector> EmbeddingBackend::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw std::invalid_argument("embed: texts must be non-empty");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    const std::size_t batch = std::max<std::size_t>(1, max_batch());
    for (std::size_t start = 0; start < texts.size(); start += batch) {
        const std::size_t end = std::min(texts.size(), start + batch);
        std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                       texts.begin() + static_cast<std::ptrdiff_t>(end));
        calls_.fetch_add(1, std::memory_order_relaxed);
        auto vectors = embed_batch(chunk);
        if (vectors.size() != chunk.size()) {
            throw BackendError("embedding backend returned wrong vector count", 1, false);
        }
        for (auto& v : vectors) out.push_back(std::move(v));
    }
    for (const auto& v : out) {
        if (v.dims() != out.front().dims()) {
            throw BackendError("embedding backend returned inconsistent dims", 1, false);
        }
    }
    return out;
}

// --- clocks ------------------------------------------------------------------

long long SystemClock::now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_ms(long long ms) {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

long long VirtualClock::now_ms() {
    std::lock_guard lock(mu_);
    return now_;
}

void VirtualClock::sleep_ms(long long ms) {
    std::lock_guard lock(mu_);
    now_ += ms;
    sleeps_.push_back(ms);
}

std::vector<long long> VirtualClock::sleeps() const {
    std::lock_guard lock(mu_);
    return sleeps_;
}

// --- simple mocks ------------------------------------------------------------

namespace {

TokenUsage mock_usage(const ChatRequest& request, const std::string& reply) {
    TokenUsage usage;
    usage.prompt_tokens = approx_token_count(request.system) + approx_token_count(request.user);
    usage.completion_tokens = approx_token_count(reply);
    usage.source = UsageSource::BackendReported;
    return usage;
}

ChatResponse mock_response(const ChatRequest& request, std::string reply, const char* model) {
    ChatResponse r;
    r.usage = mock_usage(request, reply);
    r.text = std::move(reply);
    r.model_id = model;
    r.latency_ms = 0;
    return r;
}

}  // namespace

ChatResponse EchoChatBackend::do_chat(const ChatRequest& request) {
    return mock_response(request, request.user, "mock-echo");
}

void ScriptedChatBackend::add_reply(const std::string& prompt, std::string reply) {
    replies_[fnv1a64(prompt)] = std::move(reply);
}

void ScriptedChatBackend::set_default_reply(std::string reply) {
    default_reply_ = std::move(reply);
}

ChatResponse ScriptedChatBackend::do_chat(const ChatRequest& request) {
    auto it = replies_.find(fnv1a64(request.user));
    if (it != replies_.end()) return mock_response(request, it->second, "mock-scripted");
    if (default_reply_) return mock_response(request, *default_reply_, "mock-scripted");
    throw BackendError("scripted backend has no reply for prompt", 1, false);
}

FaultInjectingChatBackend::FaultInjectingChatBackend(int fail_times, std::string success_text)
    : remaining_failures_(fail_times), success_text_(std::move(success_text)) {}

ChatResponse FaultInjectingChatBackend::do_chat(const ChatRequest& request) {
    if (remaining_failures_.fetch_sub(1, std::memory_order_relaxed) > 0) {
        throw BackendError("injected transient failure", 1, true, 503);
    }
    return mock_response(request, success_text_, "mock-faulty");
}

// --- extractive mock ---------------------------------------------------------

namespace {

// Prompt sections of the form "##Name##:" on their own line.
std::map<std::string, std::string> parse_sections(const std::string& prompt) {
    std::map<std::string, std::string> sections;
    std::string current_name;
    std::string current_body;
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = textutil::trim(line);
        if (t.size() > 5 && t.rfind("##", 0) == 0) {
            auto close = t.find("##:", 2);
            if (close != std::string::npos) {
                if (!current_name.empty()) sections[current_name] = textutil::trim(current_body);
                current_name = t.substr(2, close - 2);
                current_body = t.substr(close + 3);
                if (!textutil::trim(current_body).empty()) current_body += "\n";
                continue;
            }
        }
        if (!current_name.empty()) {
            current_body += line;
            current_body += "\n";
        }
    }
    if (!current_name.empty()) sections[current_name] = textutil::trim(current_body);
    return sections;
}

// Documents arrive as "[k] text" lines; split them back apart.
std::vector<std::string> split_doc_entries(const std::string& docs_block) {
    std::vector<std::string> entries;
    std::istringstream in(docs_block);
    std::string line;
    std::string current;
    for (; std::getline(in, line);) {
        std::string t = textutil::trim(line);
        if (!t.empty() && t.front() == '[') {
            auto close = t.find(']');
            if (close != std::string::npos) {
                if (!current.empty()) entries.push_back(current);
                current = textutil::trim(t.substr(close + 1));
                continue;
            }
        }
        if (!t.empty()) {
            if (!current.empty()) current += " ";
            current += t;
        }
    }
    if (!current.empty()) entries.push_back(current);
    if (entries.empty() && !textutil::trim(docs_block).empty()) {
        entries.push_back(textutil::trim(docs_block));
    }
    return entries;
}

bool shares_content_word(const std::string& sentence, const std::set<std::string>& query_words) {
    for (const auto& w : textutil::content_words(sentence)) {
        if (query_words.count(w)) return true;
    }
    return false;
}

std::string extract_relevant(const std::string& query, const std::string& docs_block) {
    std::set<std::string> query_words;
    for (auto& w : textutil::content_words(query)) query_words.insert(std::move(w));
    std::string out;
    for (const auto& entry : split_doc_entries(docs_block)) {
        for (const auto& sentence : textutil::split_sentences(entry)) {
            if (shares_content_word(sentence, query_words)) {
                if (!out.empty()) out += " ";
                out += sentence;
            }
        }
    }
    return out;
}

std::vector<std::string> parse_candidate_list(const std::string& block) {
    std::vector<std::string> candidates;
    auto parsed = nlohmann::json::parse(block, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_array()) {
        for (const auto& item : parsed) {
            if (item.is_string()) candidates.push_back(item.get<std::string>());
        }
        if (!candidates.empty()) return candidates;
    }
    std::istringstream in(block);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = textutil::trim(line);
        if (!t.empty()) candidates.push_back(t);
    }
    return candidates;
}

}  // namespace

ChatResponse ExtractiveMockChatBackend::do_chat(const ChatRequest& request) {
    const auto sections = parse_sections(request.user);
    auto section = [&](const char* name) -> std::string {
        auto it = sections.find(name);
        return it == sections.end() ? std::string() : it->second;
    };

    if (sections.count("Candidate Answers")) {
        const auto candidates = parse_candidate_list(section("Candidate Answers"));
        if (candidates.empty()) {
            throw BackendError("selection prompt carries no candidates", 1, false);
        }
        std::map<std::string, int> counts;
        for (const auto& c : candidates) counts[textutil::normalized_text(c)]++;
        std::string best;
        int best_count = -1;
        for (const auto& c : candidates) {
            const int count = counts[textutil::normalized_text(c)];
            if (count > best_count) {
                best_count = count;
                best = c;
            }
        }
        std::string reply = "Reasoning: " + std::to_string(best_count) + "/" +
                            std::to_string(candidates.size()) +
                            " candidates agree on this answer.\nSelected_Answer: " + best;
        return mock_response(request, reply, "mock-extractive");
    }

    if (sections.count("Answer 1") && sections.count("Answer 2")) {
        const std::string knowledge = textutil::normalized_text(section("Knowledge"));
        const std::string a1 = textutil::normalized_text(section("Answer 1"));
        const std::string a2 = textutil::normalized_text(section("Answer 2"));
        const bool in1 = !a1.empty() && knowledge.find(a1) != std::string::npos;
        const bool in2 = !a2.empty() && knowledge.find(a2) != std::string::npos;
        const char* choice = (in2 && !in1) ? "Answer 2" : "Answer 1";
        std::string reply = std::string("#Reasoning#: checked each answer against the knowledge.\n") +
                            "#Choice#: \"" + choice + "\"";
        return mock_response(request, reply, "mock-extractive");
    }

    if (sections.count("Reference docs")) {
        const std::string statement = textutil::normalized_text(section("Statement"));
        const std::string docs = textutil::normalized_text(section("Reference docs"));
        const bool supported = !statement.empty() && docs.find(statement) != std::string::npos;
        std::string reply = std::string("Reasoning: containment check against the reference docs.\n") +
                            "Answer: " + (supported ? "Factual" : "Nonfactual");
        return mock_response(request, reply, "mock-extractive");
    }

    if (sections.count("Reference text")) {
        const std::string extracted = extract_relevant(section("Question"), section("Reference text"));
        return mock_response(request, extracted.empty() ? std::string(kEmptyExtractSentinel) : extracted,
                             "mock-extractive");
    }

    if (sections.count("Extracted Information")) {
        const std::string extracted = extract_relevant(section("Statement"), section("Documents"));
        return mock_response(request, extracted.empty() ? std::string(kEmptyExtractSentinel) : extracted,
                             "mock-extractive");
    }

    if (sections.count("Rewritten")) {
        return mock_response(request, "Rephrased: " + section("Passage"), "mock-extractive");
    }

    throw BackendError("extractive mock: unrecognized prompt template", 1, false);
}

// --- hash embeddings ---------------------------------------------------------

HashEmbeddingBackend::HashEmbeddingBackend(std::uint64_t seed, std::size_t dims)
    : seed_(seed), dims_(dims) {
    if (dims_ == 0) throw std::invalid_argument("embedding dims must be >= 1");
}

std::vector<EmbeddingVector> HashEmbeddingBackend::embed_batch(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(dims_, 0.0);
        // Function words carry no signal and would dominate every pairwise
        // similarity; keep them only when nothing else remains.
        auto tokens = textutil::content_words(text);
        if (tokens.empty()) tokens = textutil::words(text);
        if (tokens.empty()) tokens.push_back("");
        for (const auto& token : tokens) {
            const std::uint64_t h = SplitRng(seed_ ^ fnv1a64(token)).next_u64();
            const std::size_t bucket = static_cast<std::size_t>(h % dims_);
            const double sign = (h >> 63) ? -1.0 : 1.0;
            v[bucket] += sign;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm == 0.0) {
            v[0] = 1.0;  // signed counts cancelled out; keep the vector usable
            norm = 1.0;
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        out.emplace_back(std::move(v));
    }
    return out;
}

// --- rate limiting / retries / usage tap -------------------------------------

RateLimiter::RateLimiter(double rps, Clock& clock)
    : rps_(rps), tokens_(1.0), last_ms_(clock.now_ms()), clock_(clock) {
    if (rps <= 0.0) throw std::invalid_argument("rate_limit_rps must be > 0");
}

void RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    for (;;) {
        const long long now = clock_.now_ms();
        tokens_ = std::min(1.0 + rps_, tokens_ + (now - last_ms_) / 1000.0 * rps_);
        last_ms_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const long long wait = static_cast<long long>(std::ceil((1.0 - tokens_) * 1000.0 / rps_));
        clock_.sleep_ms(std::max<long long>(wait, 1));
    }
}

RetryingChatBackend::RetryingChatBackend(ChatBackend& inner, const ProviderConfig& config,
                                         Clock& clock, std::uint64_t jitter_seed,
                                         std::shared_ptr<RateLimiter> limiter)
    : inner_(inner), max_retries_(config.max_retries), backoff_base_ms_(config.backoff_base_ms),
      clock_(clock), limiter_(std::move(limiter)), rng_(SplitRng(jitter_seed).split("retry-jitter")) {}

ChatResponse RetryingChatBackend::do_chat(const ChatRequest& request) {
    int attempt = 0;
    for (;;) {
        ++attempt;
        if (limiter_) limiter_->acquire();
        try {
            ChatResponse response = inner_.chat(request);
            last_attempts_.store(attempt, std::memory_order_relaxed);
            return response;
        } catch (const BackendError& err) {
            if (!err.transient) {
                last_attempts_.store(attempt, std::memory_order_relaxed);
                throw BackendError(err.what(), attempt, false, err.http_status);
            }
            if (attempt > max_retries_) {
                last_attempts_.store(attempt, std::memory_order_relaxed);
                throw BackendError(std::string("retries exhausted: ") + err.what(), attempt,
                                   true, err.http_status);
            }
            double jitter;
            {
                std::lock_guard lock(rng_mu_);
                jitter = rng_.next_unit() * 0.5 - 0.25;
            }
            const double base = static_cast<double>(backoff_base_ms_) *
                                std::pow(2.0, static_cast<double>(attempt - 1));
            clock_.sleep_ms(static_cast<long long>(std::llround(base * (1.0 + jitter))));
        }
    }
}

void UsageTapChatBackend::set_phase(std::string phase) {
    std::lock_guard lock(mu_);
    phase_ = std::move(phase);
}

std::vector<UsageTapChatBackend::Entry> UsageTapChatBackend::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

void UsageTapChatBackend::clear() {
    std::lock_guard lock(mu_);
    entries_.clear();
}

ChatResponse UsageTapChatBackend::do_chat(const ChatRequest& request) {
    ChatResponse response = inner_.chat(request);
    std::lock_guard lock(mu_);
    entries_.push_back({phase_, response.usage, response.latency_ms});
    return response;
}

}  // namespace edc2rag
