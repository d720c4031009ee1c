#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ibeval/chat.hpp"
#include "ibeval/corpus.hpp"
#include "ibeval/promptfabric.hpp"

namespace ibeval {

class EndpointError : public std::runtime_error {
 public:
  explicit EndpointError(const std::string& msg, bool retryable = false)
      : std::runtime_error(msg), retryable(retryable) {}
  bool retryable;
};

struct EndpointConfig {
  std::string base_url;     // e.g. https://api.openai.com/v1
  std::string model_name;
  std::string api_key_env;  // key comes from this env var, never from files
  double temperature = 0.0;
  int max_retries = 3;
  int requests_per_minute = 60;
  double timeout_seconds = 30.0;
  int backoff_base_ms = 500;  // doubles per retry
};

enum class ResponderKind { Live, Replay, Scripted };
std::string_view responder_kind_key(ResponderKind kind);

// Extra request context so scripted responders can key off the sample and
// recorders can tag entries; the live client ignores it.
struct RequestContext {
  std::string sample_id;
  std::string cell;  // "<model>/<setting>"
  int turn_index = 0;
};

class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages,
                               const RequestContext& ctx) = 0;
  virtual ResponderKind kind() const = 0;

  // Adapter for CompleteFn consumers (live polishing, judge fallback).
  CompleteFn as_complete_fn(RequestContext ctx);
};

// Stable across runs and platforms for identical (model, messages, turn).
std::string request_fingerprint(std::string_view model,
                                const std::vector<ChatMessage>& messages,
                                int turn_index);

// Sliding-window limiter: at most per_minute acquisitions in any 60 s
// window. Clock and sleep are injectable for tests.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;
  using NowFn = std::function<Clock::time_point()>;
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  explicit RateLimiter(int per_minute);
  RateLimiter(int per_minute, NowFn now, SleepFn sleep);

  void acquire();

 private:
  int per_minute_;
  NowFn now_;
  SleepFn sleep_;
  std::mutex mu_;
  std::deque<Clock::time_point> issued_;
};

// One-shot chat completion against {base_url}/chat/completions with bearer
// auth, retries with exponential backoff on transient failures, and a
// shared per-endpoint rate limiter. Auth failures do not retry.
std::string complete(const std::vector<ChatMessage>& messages,
                     const EndpointConfig& cfg);

class HttpResponder : public Responder {
 public:
  explicit HttpResponder(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
  std::string complete(const std::vector<ChatMessage>& messages,
                       const RequestContext& ctx) override;
  ResponderKind kind() const override { return ResponderKind::Live; }
  const EndpointConfig& config() const { return cfg_; }

 private:
  EndpointConfig cfg_;
};

class ScriptedResponder : public Responder {
 public:
  using Fn = std::function<std::string(const std::vector<ChatMessage>&,
                                       const RequestContext&)>;
  explicit ScriptedResponder(Fn fn) : fn_(std::move(fn)) {}
  static ScriptedResponder constant(std::string text);

  std::string complete(const std::vector<ChatMessage>& messages,
                       const RequestContext& ctx) override;
  ResponderKind kind() const override { return ResponderKind::Scripted; }

 private:
  Fn fn_;
};

// fingerprint -> response_text store; file form is JSONL
// {"fingerprint": ..., "response_text": ...}, sorted by fingerprint.
class Cassette {
 public:
  // Throws EndpointError when the fingerprint exists with differing text.
  void put(const std::string& fingerprint, const std::string& text);
  std::optional<std::string> get(const std::string& fingerprint) const;
  std::size_t size() const { return entries_.size(); }

  void save(const std::string& path) const;
  static Cassette load(const std::string& path);

 private:
  std::map<std::string, std::string> entries_;
};

Cassette record_cassette(const std::vector<struct Transcript>& transcripts);

// Answers by exact fingerprint lookup; a miss is an error ("no recording").
class ReplayResponder : public Responder {
 public:
  explicit ReplayResponder(Cassette cassette)
      : cassette_(std::move(cassette)) {}
  std::string complete(const std::vector<ChatMessage>& messages,
                       const RequestContext& ctx) override;
  ResponderKind kind() const override { return ResponderKind::Replay; }

 private:
  Cassette cassette_;
};

// Passes through to an inner responder while capturing every exchange.
class RecordingResponder : public Responder {
 public:
  RecordingResponder(Responder& inner, Cassette& sink)
      : inner_(inner), sink_(sink) {}
  std::string complete(const std::vector<ChatMessage>& messages,
                       const RequestContext& ctx) override;
  ResponderKind kind() const override { return inner_.kind(); }

 private:
  Responder& inner_;
  Cassette& sink_;
  std::mutex mu_;
};

struct TranscriptTurn {
  std::string prompt_text;
  std::string response_text;
  std::string fingerprint;
  long long latency_ms = 0;
};

struct Transcript {
  std::string sample_id;
  std::string setting;
  std::string model;
  DatasetForm form = DatasetForm::Judging;
  ResponderKind responder = ResponderKind::Scripted;
  std::vector<TranscriptTurn> turns;
  // Fingerprint of the final request; for multi-turn plans the round-2
  // request already embeds the round-1 exchange.
  std::string request_fingerprint;
};

// Carries the partial transcript of the turns that did complete.
class DialogueError : public std::runtime_error {
 public:
  DialogueError(const std::string& msg, Transcript partial)
      : std::runtime_error(msg), partial(std::move(partial)) {}
  Transcript partial;
};

// Executes the plan's turns in order. Reflection turns are rendered from
// the previous answer; multi-turn requests carry the round-1 exchange as
// user/assistant/user history. Live-polish plans send the rewrite request
// first and then the rewritten prompt as a fresh request.
Transcript run_dialogue(const PromptPlan& plan, Responder& responder,
                        const Sample& sample, const std::string& model,
                        const std::string& setting);

}  // namespace ibeval
