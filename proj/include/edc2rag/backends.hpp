#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "edc2rag/core.hpp"

namespace edc2rag {

enum class UsageSource { BackendReported, Approximate };

const char* to_string(UsageSource s);

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    UsageSource source = UsageSource::Approximate;
};

/// Rough token estimate (~4 chars per token) for providers that do not
/// report usage; always flagged Approximate by callers.
long long approx_token_count(const std::string& text);

struct ChatRequest {
    std::string system;  // empty = no system message
    std::string user;
    double temperature = 0.0;
    std::optional<int> max_tokens;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
    std::string model_id;
    long long latency_ms = 0;
};

/// Remote provider settings. The API key is read from the named environment
/// variable at call time and never stored or logged.
struct ProviderConfig {
    std::string endpoint_url = "https://api.openai.com/v1";
    std::string api_key_env_var = "OPENAI_API_KEY";
    std::string model_id = "gpt-4o-mini";
    int max_retries = 3;
    int backoff_base_ms = 200;
    std::optional<double> rate_limit_rps;
};

struct BackendError : std::runtime_error {
    BackendError(const std::string& what, int attempts_, bool transient_, int http_status_ = 0)
        : std::runtime_error(what), attempts(attempts_), transient(transient_),
          http_status(http_status_) {}
    int attempts;
    bool transient;
    int http_status;
};

class Clock {
public:
    virtual ~Clock() = default;
    virtual long long now_ms() = 0;
    virtual void sleep_ms(long long ms) = 0;
};

class SystemClock : public Clock {
public:
    long long now_ms() override;
    void sleep_ms(long long ms) override;
};

/// Test clock: sleeping advances time instantly and every sleep is recorded.
class VirtualClock : public Clock {
public:
    long long now_ms() override;
    void sleep_ms(long long ms) override;
    std::vector<long long> sleeps() const;

private:
    mutable std::mutex mu_;
    long long now_ = 0;
    std::vector<long long> sleeps_;
};

/// Chat provider interface. chat() is safe to call from concurrent tasks and
/// counts every upstream call.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    ChatResponse chat(const ChatRequest& request) {
        if (request.user.empty()) {
            throw std::invalid_argument("chat request must carry a user message");
        }
        calls_.fetch_add(1, std::memory_order_relaxed);
        return do_chat(request);
    }

    std::uint64_t call_count() const { return calls_.load(std::memory_order_relaxed); }
    void reset_call_count() { calls_.store(0, std::memory_order_relaxed); }

    /// Deterministic backends produce identical responses for identical
    /// requests; the runner then reports logical rather than wall-clock time.
    virtual bool deterministic() const { return false; }

protected:
    virtual ChatResponse do_chat(const ChatRequest& request) = 0;

private:
    std::atomic<std::uint64_t> calls_{0};
};

/// Embedding provider interface with internal batching.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    std::uint64_t upstream_calls() const { return calls_.load(std::memory_order_relaxed); }
    virtual std::size_t max_batch() const { return 64; }
    virtual bool deterministic() const { return false; }

protected:
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;

private:
    std::atomic<std::uint64_t> calls_{0};
};

// --- Offline backends -------------------------------------------------------

class EchoChatBackend : public ChatBackend {
public:
    bool deterministic() const override { return true; }

protected:
    ChatResponse do_chat(const ChatRequest& request) override;
};

/// Canned replies keyed by a hash of the rendered prompt.
class ScriptedChatBackend : public ChatBackend {
public:
    void add_reply(const std::string& prompt, std::string reply);
    void set_default_reply(std::string reply);
    bool deterministic() const override { return true; }

protected:
    ChatResponse do_chat(const ChatRequest& request) override;

private:
    std::map<std::uint64_t, std::string> replies_;
    std::optional<std::string> default_reply_;
};

/// Fails the first `fail_times` calls with a transient error, then answers
/// with a fixed response.
class FaultInjectingChatBackend : public ChatBackend {
public:
    explicit FaultInjectingChatBackend(int fail_times, std::string success_text = "ok");
    bool deterministic() const override { return true; }

protected:
    ChatResponse do_chat(const ChatRequest& request) override;

private:
    std::atomic<int> remaining_failures_;
    std::string success_text_;
};

/// Offline stand-in that honors the shipped prompt contracts: extracts
/// query-overlapping sentences (or the sentinel) from compression prompts,
/// answers selection prompts with the modal candidate, and resolves verdict
/// prompts by containment.
class ExtractiveMockChatBackend : public ChatBackend {
public:
    bool deterministic() const override { return true; }

protected:
    ChatResponse do_chat(const ChatRequest& request) override;
};

/// Deterministic token-feature embedding: words hash into signed buckets and
/// the result is L2-normalized, so texts sharing vocabulary score high.
class HashEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HashEmbeddingBackend(std::uint64_t seed, std::size_t dims = 256);
    bool deterministic() const override { return true; }
    std::size_t dims() const { return dims_; }

protected:
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    std::uint64_t seed_;
    std::size_t dims_;
};

// --- Call-shaping wrappers ---------------------------------------------------

/// Global token bucket over requests per second, shared by every caller.
class RateLimiter {
public:
    RateLimiter(double rps, Clock& clock);
    void acquire();

private:
    double rps_;
    double tokens_;
    long long last_ms_;
    Clock& clock_;
    std::mutex mu_;
};

/// Retries transient failures with exponential backoff and bounded jitter.
/// Sleep before retry r is backoff_base_ms * 2^(r-1), jittered by at most
/// +/-25%. Non-transient errors propagate immediately.
class RetryingChatBackend : public ChatBackend {
public:
    RetryingChatBackend(ChatBackend& inner, const ProviderConfig& config, Clock& clock,
                        std::uint64_t jitter_seed = 0,
                        std::shared_ptr<RateLimiter> limiter = nullptr);

    int last_attempts() const { return last_attempts_.load(std::memory_order_relaxed); }
    bool deterministic() const override { return inner_.deterministic(); }

protected:
    ChatResponse do_chat(const ChatRequest& request) override;

private:
    ChatBackend& inner_;
    int max_retries_;
    int backoff_base_ms_;
    Clock& clock_;
    std::shared_ptr<RateLimiter> limiter_;
    std::mutex rng_mu_;
    SplitRng rng_;
    std::atomic<int> last_attempts_{0};
};

/// Labels every call with the pipeline phase that issued it, for per-call
/// usage accounting in result records.
class UsageTapChatBackend : public ChatBackend {
public:
    struct Entry {
        std::string purpose;
        TokenUsage usage;
        long long latency_ms = 0;
    };

    explicit UsageTapChatBackend(ChatBackend& inner) : inner_(inner) {}
    void set_phase(std::string phase);
    std::vector<Entry> entries() const;
    void clear();
    bool deterministic() const override { return inner_.deterministic(); }

protected:
    ChatResponse do_chat(const ChatRequest& request) override;

private:
    ChatBackend& inner_;
    mutable std::mutex mu_;
    std::string phase_ = "chat";
    std::vector<Entry> entries_;
};

// --- Remote backends ---------------------------------------------------------

/// JSON-over-HTTP chat completions client in the de-facto
/// {model, messages, temperature} shape. Works against any compatible
/// gateway; pair with RetryingChatBackend for retry/backoff.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(ProviderConfig config);
    ~HttpChatBackend() override;

protected:
    ChatResponse do_chat(const ChatRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(ProviderConfig config, std::size_t batch = 64);
    ~HttpEmbeddingBackend() override;
    std::size_t max_batch() const override { return batch_; }

protected:
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t batch_;
};

}  // namespace edc2rag
