#include "ibeval/modelclient.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#ifdef IBEVAL_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "ibeval/rng.hpp"

namespace ibeval {

using nlohmann::json;

std::string_view responder_kind_key(ResponderKind kind) {
  switch (kind) {
    case ResponderKind::Live: return "live";
    case ResponderKind::Replay: return "replay";
    case ResponderKind::Scripted: return "scripted";
  }
  return "scripted";
}

CompleteFn Responder::as_complete_fn(RequestContext ctx) {
  return [this, ctx](const std::vector<ChatMessage>& messages) {
    return this->complete(messages, ctx);
  };
}

std::string request_fingerprint(std::string_view model,
                                const std::vector<ChatMessage>& messages,
                                int turn_index) {
  // Unit separator framing keeps (role, content) boundaries unambiguous.
  std::string buf;
  buf += model;
  buf += '\x1f';
  buf += std::to_string(turn_index);
  for (const ChatMessage& m : messages) {
    buf += '\x1f';
    buf += m.role;
    buf += '\x1e';
    buf += m.content;
  }
  std::uint64_t h = fnv1a64(buf);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

// ---------------------------------------------------------------------------
// Rate limiting
// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(int per_minute)
    : RateLimiter(per_minute, [] { return Clock::now(); },
                  [](std::chrono::milliseconds d) {
                    std::this_thread::sleep_for(d);
                  }) {}

RateLimiter::RateLimiter(int per_minute, NowFn now, SleepFn sleep)
    : per_minute_(per_minute), now_(std::move(now)), sleep_(std::move(sleep)) {}

void RateLimiter::acquire() {
  using namespace std::chrono;
  if (per_minute_ <= 0) return;
  for (;;) {
    milliseconds wait{0};
    {
      std::lock_guard lock(mu_);
      Clock::time_point t = now_();
      while (!issued_.empty() && t - issued_.front() >= minutes(1))
        issued_.pop_front();
      if (static_cast<int>(issued_.size()) < per_minute_) {
        issued_.push_back(t);
        return;
      }
      wait = duration_cast<milliseconds>(issued_.front() + minutes(1) - t) +
             milliseconds(1);
    }
    sleep_(wait);
  }
}

namespace {

// One limiter per endpoint so that the per-minute window spans calls.
RateLimiter& limiter_for(const EndpointConfig& cfg) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<RateLimiter>> limiters;
  std::lock_guard lock(mu);
  std::string key = cfg.base_url + "|" + cfg.model_name + "|" +
                    std::to_string(cfg.requests_per_minute);
  auto it = limiters.find(key);
  if (it == limiters.end()) {
    it = limiters
             .emplace(key,
                      std::make_unique<RateLimiter>(cfg.requests_per_minute))
             .first;
  }
  return *it->second;
}

struct ParsedUrl {
  std::string host_port;  // scheme://host[:port]
  std::string path_prefix;
};

ParsedUrl split_base_url(const std::string& base_url) {
  std::size_t scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw EndpointError("base_url lacks a scheme: " + base_url);
  std::size_t path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.host_port = base_url;
  } else {
    out.host_port = base_url.substr(0, path_start);
    out.path_prefix = base_url.substr(path_start);
    while (out.path_prefix.size() > 1 && out.path_prefix.back() == '/')
      out.path_prefix.pop_back();
    if (out.path_prefix == "/") out.path_prefix.clear();
  }
  return out;
}

std::string attempt_completion(const std::vector<ChatMessage>& messages,
                               const EndpointConfig& cfg) {
  ParsedUrl url = split_base_url(cfg.base_url);
  httplib::Client client(url.host_port);
  auto timeout = std::chrono::milliseconds(
      static_cast<long long>(cfg.timeout_seconds * 1000.0));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (key != nullptr && *key != '\0')
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  json body;
  body["model"] = cfg.model_name;
  body["temperature"] = cfg.temperature;
  json msgs = json::array();
  for (const ChatMessage& m : messages)
    msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);

  auto res = client.Post(url.path_prefix + "/chat/completions", headers,
                         body.dump(), "application/json");
  if (!res)
    throw EndpointError("transport failure: " + httplib::to_string(res.error()),
                        true);
  if (res->status == 401 || res->status == 403)
    throw EndpointError("authentication failed (HTTP " +
                            std::to_string(res->status) + ")",
                        false);
  if (res->status != 200)
    throw EndpointError("HTTP " + std::to_string(res->status) + ": " +
                            res->body,
                        res->status == 408 || res->status == 429 ||
                            res->status >= 500);
  try {
    json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content")
        .get<std::string>();
  } catch (const json::exception& e) {
    throw EndpointError(std::string("malformed completion response: ") +
                            e.what(),
                        false);
  }
}

}  // namespace

std::string complete(const std::vector<ChatMessage>& messages,
                     const EndpointConfig& cfg) {
  RateLimiter& limiter = limiter_for(cfg);
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      auto backoff = std::chrono::milliseconds(
          static_cast<long long>(cfg.backoff_base_ms) << (attempt - 1));
      std::this_thread::sleep_for(backoff);
    }
    limiter.acquire();
    try {
      return attempt_completion(messages, cfg);
    } catch (const EndpointError& e) {
      if (!e.retryable) throw;
      last_error = e.what();
    }
  }
  throw EndpointError("retries exhausted; last failure: " + last_error, false);
}

std::string HttpResponder::complete(const std::vector<ChatMessage>& messages,
                                    const RequestContext&) {
  return ibeval::complete(messages, cfg_);
}

ScriptedResponder ScriptedResponder::constant(std::string text) {
  return ScriptedResponder(
      [text = std::move(text)](const std::vector<ChatMessage>&,
                               const RequestContext&) { return text; });
}

std::string ScriptedResponder::complete(
    const std::vector<ChatMessage>& messages, const RequestContext& ctx) {
  return fn_(messages, ctx);
}

// ---------------------------------------------------------------------------
// Cassettes
// ---------------------------------------------------------------------------

void Cassette::put(const std::string& fingerprint, const std::string& text) {
  auto [it, inserted] = entries_.emplace(fingerprint, text);
  if (!inserted && it->second != text)
    throw EndpointError("cassette conflict: fingerprint " + fingerprint +
                        " recorded with differing response text");
}

std::optional<std::string> Cassette::get(const std::string& fingerprint) const {
  auto it = entries_.find(fingerprint);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void Cassette::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw EndpointError("cannot write cassette: " + path);
  for (const auto& [fp, text] : entries_) {
    json j{{"fingerprint", fp}, {"response_text", text}};
    out << j.dump() << '\n';
  }
}

Cassette Cassette::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EndpointError("cannot open cassette: " + path);
  Cassette c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      c.put(j.at("fingerprint").get<std::string>(),
            j.at("response_text").get<std::string>());
    } catch (const json::exception& e) {
      throw EndpointError("cassette " + path + ":" + std::to_string(line_no) +
                          ": " + e.what());
    }
  }
  return c;
}

Cassette record_cassette(const std::vector<Transcript>& transcripts) {
  Cassette c;
  for (const Transcript& t : transcripts)
    for (const TranscriptTurn& turn : t.turns)
      c.put(turn.fingerprint, turn.response_text);
  return c;
}

std::string ReplayResponder::complete(const std::vector<ChatMessage>& messages,
                                      const RequestContext& ctx) {
  std::string fp = request_fingerprint(ctx.cell, messages, ctx.turn_index);
  if (auto hit = cassette_.get(fp)) return *hit;
  throw EndpointError("no recording for fingerprint " + fp + " (cell " +
                          ctx.cell + ", sample " + ctx.sample_id + ")",
                      false);
}

std::string RecordingResponder::complete(
    const std::vector<ChatMessage>& messages, const RequestContext& ctx) {
  std::string text = inner_.complete(messages, ctx);
  std::string fp = request_fingerprint(ctx.cell, messages, ctx.turn_index);
  std::lock_guard lock(mu_);
  sink_.put(fp, text);
  return text;
}

// ---------------------------------------------------------------------------
// Dialogue execution
// ---------------------------------------------------------------------------

Transcript run_dialogue(const PromptPlan& plan, Responder& responder,
                        const Sample& sample, const std::string& model,
                        const std::string& setting) {
  Transcript transcript;
  transcript.sample_id = sample.id;
  transcript.setting = setting;
  transcript.model = model;
  transcript.form = sample.form;
  transcript.responder = responder.kind();

  std::vector<ChatMessage> history;
  std::string prior_response;
  for (std::size_t i = 0; i < plan.turns.size(); ++i) {
    const TurnSpec& turn = plan.turns[i];
    std::string text = turn.text;
    std::vector<ChatMessage> messages;
    bool extends_history = true;

    switch (turn.kind) {
      case TurnKind::Standard:
        messages = history;
        messages.push_back({"user", text});
        break;
      case TurnKind::Reflection:
        text = render_multiturn_round2(sample, prior_response);
        messages = history;
        messages.push_back({"user", text});
        break;
      case TurnKind::PolishRequest:
        messages.push_back(
            {"system", std::string(polish_rewrite_instruction())});
        messages.push_back({"user", text});
        extends_history = false;
        break;
      case TurnKind::PolishedLive:
        text = prior_response;
        messages.push_back({"user", text});
        extends_history = false;
        break;
    }

    RequestContext ctx{sample.id, model + "/" + setting,
                       static_cast<int>(i)};
    std::string fp = request_fingerprint(ctx.cell, messages, ctx.turn_index);
    auto started = std::chrono::steady_clock::now();
    std::string response;
    try {
      response = responder.complete(messages, ctx);
    } catch (const std::exception& e) {
      throw DialogueError("turn " + std::to_string(i) + " of sample '" +
                              sample.id + "' failed: " + e.what(),
                          std::move(transcript));
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    transcript.turns.push_back({text, response, fp, elapsed.count()});
    transcript.request_fingerprint = fp;
    if (extends_history) {
      history.push_back({"user", text});
      history.push_back({"assistant", response});
    }
    prior_response = response;
  }
  return transcript;
}

}  // namespace ibeval
