#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <utility>

#include "ragaudit/cache.hpp"
#include "ragaudit/core.hpp"
#include "ragaudit/judge.hpp"
#include "ragaudit/templates.hpp"
#include "ragaudit/tokenizer.hpp"

namespace ragaudit {

struct RetryPolicy {
    int attempts = 3;
    int base_delay_ms = 100;  // doubled after each failed attempt
};

struct ClientStatsSnapshot {
    std::uint64_t backend_calls = 0;  // physical calls, retries included
    std::uint64_t cache_hits = 0;
    std::uint64_t retries = 0;
};

// Front door for judge traffic: renders the template, refuses prompts that
// exceed the backend window, consults the cache, retries transport failures
// with exponential backoff, and persists fresh completions. Safe for
// concurrent complete() calls.
class JudgeClient {
  public:
    struct Options {
        TemplateCatalog catalog;
        std::shared_ptr<CompletionCache> cache;      // null = uncached
        std::shared_ptr<const Tokenizer> tokenizer;  // null = approx8
        RetryPolicy retry;
    };

    JudgeClient() : JudgeClient(Options{}) {}

    explicit JudgeClient(Options opt)
        : catalog_(std::move(opt.catalog)),
          cache_(std::move(opt.cache)),
          tokenizer_(opt.tokenizer ? std::move(opt.tokenizer)
                                   : std::shared_ptr<const Tokenizer>(std::make_shared<ApproxTokenizer>())),
          retry_(opt.retry) {
        if (retry_.attempts < 1) throw ConfigError("retry attempts must be >= 1");
    }

    std::string render(const JudgeRequest& request) const {
        return catalog_.render(request.template_id, request.slots);
    }

    RawCompletion complete(JudgeBackend& backend, const JudgeRequest& request) {
        const std::string prompt = render(request);
        const std::size_t prompt_tokens = tokenizer_->count(prompt);
        if (prompt_tokens > backend.context_window()) {
            throw ContextOverflowError("prompt of " + std::to_string(prompt_tokens) +
                                       " tokens exceeds window of " +
                                       std::to_string(backend.context_window()) + " on backend '" +
                                       backend.name() + "'");
        }
        const CacheKey key = CacheKey::make(backend.name(), backend.model(), prompt,
                                            request.sampling.temperature, request.sampling.seed);
        if (cache_) {
            if (std::optional<RawCompletion> hit = cache_->get(key)) {
                cache_hits_.fetch_add(1, std::memory_order_relaxed);
                return *hit;
            }
        }

        std::string text;
        auto started = std::chrono::steady_clock::now();
        int delay_ms = retry_.base_delay_ms;
        for (int attempt = 0;; ++attempt) {
            try {
                backend_calls_.fetch_add(1, std::memory_order_relaxed);
                text = backend.complete(prompt, request.sampling);
                break;
            } catch (const TransportError&) {
                if (attempt + 1 >= retry_.attempts) throw;
                retries_.fetch_add(1, std::memory_order_relaxed);
                if (delay_ms > 0) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
                }
                delay_ms *= 2;
            }
        }
        auto elapsed = std::chrono::steady_clock::now() - started;

        if (cache_) cache_->put(key, backend.name(), text);

        RawCompletion out;
        out.text = std::move(text);
        out.backend = backend.name();
        out.latency_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        out.from_cache = false;
        return out;
    }

    ClientStatsSnapshot stats() const {
        return {backend_calls_.load(std::memory_order_relaxed),
                cache_hits_.load(std::memory_order_relaxed),
                retries_.load(std::memory_order_relaxed)};
    }

    const TemplateCatalog& catalog() const { return catalog_; }
    const Tokenizer& tokenizer() const { return *tokenizer_; }
    const std::shared_ptr<CompletionCache>& cache() const { return cache_; }

  private:
    TemplateCatalog catalog_;
    std::shared_ptr<CompletionCache> cache_;
    std::shared_ptr<const Tokenizer> tokenizer_;
    RetryPolicy retry_;
    std::atomic<std::uint64_t> backend_calls_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
    std::atomic<std::uint64_t> retries_{0};
};

}  // namespace ragaudit
