#pragma once

// Pluggable model backends, the few-shot parsing prompt and the Min-K%
// probability metric.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ruleguide/error.hpp"
#include "ruleguide/prompt.hpp"
#include "ruleguide/tree.hpp"

namespace ruleguide {

class Backend {
 public:
  virtual ~Backend() = default;
  // Raw completion text for a rendered prompt. Must be safe to call from
  // several threads.
  virtual std::string complete(const std::string& prompt) = 0;
};

inline std::string complete(Backend& backend, const PromptSpec& prompt) {
  return backend.complete(render(prompt));
}

// Replies from a replay file: JSONL of {prompt_hash, prompt_text, reply_text}.
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend() = default;

  static ScriptedBackend from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open replay file '" + path + "'");
    ScriptedBackend b;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto j = nlohmann::json::parse(line);
        b.replies_[j.at("prompt_hash").get<std::string>()] = j.at("reply_text").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::Config, path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return b;
  }

  void add(const std::string& prompt, std::string reply) {
    replies_[stable_hash(prompt)] = std::move(reply);
  }

  std::string complete(const std::string& prompt) override {
    auto h = stable_hash(prompt);
    auto it = replies_.find(h);
    if (it == replies_.end()) throw Error(Errc::MissingReplay, "no recorded reply for prompt " + h);
    return it->second;
  }

  std::size_t size() const { return replies_.size(); }

 private:
  std::map<std::string, std::string> replies_;
};

// Adapts a callable; used for oracle and fault-injection backends.
class FunctionBackend : public Backend {
 public:
  explicit FunctionBackend(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const std::string& prompt) override { return fn_(prompt); }

 private:
  std::function<std::string(const std::string&)> fn_;
};

// Forwards to another backend and appends every exchange to a replay file.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(Backend& inner, const std::string& path) : inner_(inner), out_(path, std::ios::app) {
    if (!out_) throw Error(Errc::Io, "cannot open record file '" + path + "'");
  }

  std::string complete(const std::string& prompt) override {
    std::string reply = inner_.complete(prompt);
    nlohmann::json j;
    j["prompt_hash"] = stable_hash(prompt);
    j["prompt_text"] = prompt;
    j["reply_text"] = reply;
    std::lock_guard<std::mutex> lock(mu_);
    out_ << j.dump() << '\n';
    out_.flush();
    return reply;
  }

 private:
  Backend& inner_;
  std::mutex mu_;
  std::ofstream out_;
};

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_ms = 1000;
  double backoff_multiplier = 2.0;
};

struct BackendSpec {
  enum class Kind { HttpOpenAiCompatible, Scripted };

  Kind kind = Kind::Scripted;
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-4";
  double temperature = 0.0;
  int max_tokens = 1024;
  int timeout_s = 60;
  RetryPolicy retry;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string replay_path;

  void validate() const {
    if (temperature < 0.0) throw Error(Errc::Config, "temperature must be >= 0");
    if (retry.max_attempts < 1) throw Error(Errc::Config, "max_attempts must be >= 1");
    if (kind == Kind::Scripted && replay_path.empty()) {
      throw Error(Errc::Config, "scripted backend requires a replay file");
    }
  }
};

struct HttpRequest {
  std::string path;
  std::string body;
  std::map<std::string, std::string> headers;
};

// status 0 means the request never completed (connection error or timeout).
struct HttpResponse {
  int status = 0;
  std::string body;
  std::string error;
};

using HttpTransport = std::function<HttpResponse(const HttpRequest&)>;

// Splits "https://host:port/v1" into origin and base path.
inline std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

inline std::string chat_completions_path(const std::string& endpoint) {
  std::string path = split_endpoint(endpoint).second;
  const std::string suffix = "/chat/completions";
  if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    path += suffix;
  }
  return path;
}

// Client for OpenAI-style chat-completion endpoints. The prompt is sent as a
// single user message; the first choice's message content is returned.
class HttpBackend : public Backend {
 public:
  HttpBackend(BackendSpec spec, HttpTransport transport, std::string api_key = {})
      : spec_(std::move(spec)), transport_(std::move(transport)), api_key_(std::move(api_key)) {}

  std::string complete(const std::string& prompt) override {
    HttpRequest req;
    req.path = chat_completions_path(spec_.endpoint);
    nlohmann::json body;
    body["model"] = spec_.model;
    body["temperature"] = spec_.temperature;
    body["max_tokens"] = spec_.max_tokens;
    nlohmann::json message = {{"role", "user"}, {"content", prompt}};
    body["messages"] = nlohmann::json::array();
    body["messages"].push_back(std::move(message));
    req.body = body.dump();
    req.headers["Content-Type"] = "application/json";
    if (!api_key_.empty()) req.headers["Authorization"] = "Bearer " + api_key_;

    double wait_ms = spec_.retry.backoff_ms;
    Errc last_code = Errc::BackendFailure;
    std::string last_msg;
    for (int attempt = 1; attempt <= spec_.retry.max_attempts; ++attempt) {
      ++attempts_;
      HttpResponse resp = transport_(req);
      if (resp.status == 200) return extract_content(resp.body);
      if (resp.status == 0) {
        last_code = Errc::Timeout;
        last_msg = resp.error.empty() ? "request did not complete" : resp.error;
      } else if (resp.status == 429) {
        last_code = Errc::RateLimited;
        last_msg = "HTTP 429";
      } else if (resp.status >= 500) {
        last_code = Errc::BackendFailure;
        last_msg = "HTTP " + std::to_string(resp.status);
      } else {
        throw Error(Errc::BackendFailure,
                    "HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 200));
      }
      if (attempt < spec_.retry.max_attempts && wait_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(wait_ms)));
        wait_ms *= spec_.retry.backoff_multiplier;
      }
    }
    throw Error(last_code, last_msg + " after " + std::to_string(spec_.retry.max_attempts) +
                               " attempts");
  }

  // Requests issued so far, retries included.
  std::size_t attempts() const { return attempts_; }

  static std::string extract_content(const std::string& body) {
    try {
      auto j = nlohmann::json::parse(body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::BackendFailure, std::string("unexpected response body: ") + e.what());
    }
  }

 private:
  BackendSpec spec_;
  HttpTransport transport_;
  std::string api_key_;
  std::atomic<std::size_t> attempts_{0};
};

// Cuts the bracketed tree out of a model reply: from the first '(' through
// the end of the first balanced tree, or through the last ')' if the tree
// never closes.
inline std::string extract_tree_text(const std::string& reply) {
  auto first = reply.find('(');
  if (first == std::string::npos) return reply;
  long depth = 0;
  for (std::size_t i = first; i < reply.size(); ++i) {
    if (reply[i] == '(') {
      ++depth;
    } else if (reply[i] == ')') {
      if (--depth == 0) return reply.substr(first, i - first + 1);
    }
  }
  auto last = reply.find_last_of(')');
  std::string out = last == std::string::npos || last < first ? reply.substr(first)
                                                               : reply.substr(first, last - first + 1);
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

// Reply text -> tree, repairing brackets on the way. Throws Unrepairable.
inline Tree parse_reply(const std::string& reply) {
  return parse_bracketed(repair_brackets(extract_tree_text(reply)));
}

struct Shot {
  std::string sentence;
  std::string tree;
};

inline PromptSpec few_shot_prompt(const std::string& sentence, const std::vector<Shot>& shots) {
  if (shots.empty()) throw Error(Errc::Precondition, "few-shot parsing needs at least one shot");
  PromptSpec p;
  p.sentence = sentence;
  for (const auto& s : shots) p.examples.push_back({s.sentence, s.tree, {}, {}});
  return p;
}

inline std::string few_shot_parse(const std::string& sentence, const std::vector<Shot>& shots,
                                  Backend& backend) {
  return complete(backend, few_shot_prompt(sentence, shots));
}

struct TokenLogProbs {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;  // natural log, each <= 0
};

// Min-K% probability: mean negative log-probability of the ceil(k * n)
// least likely tokens. Higher means less likely to have been seen in
// pre-training.
inline double mkp(const TokenLogProbs& lp, double k_fraction = 0.2) {
  if (lp.logprobs.empty()) throw Error(Errc::EmptySequence, "no token log-probabilities");
  if (!lp.tokens.empty() && lp.tokens.size() != lp.logprobs.size()) {
    throw Error(Errc::Precondition, "tokens and logprobs differ in length");
  }
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) {
    throw Error(Errc::Precondition, "k must lie in (0, 1]");
  }
  for (double v : lp.logprobs) {
    if (!(v <= 0.0)) throw Error(Errc::Precondition, "log-probabilities must be <= 0");
  }
  std::size_t n = lp.logprobs.size();
  auto take = static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(n) - 1e-9));
  take = std::clamp<std::size_t>(take, 1, n);
  std::vector<double> sorted = lp.logprobs;
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(take), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < take; ++i) sum -= sorted[i];
  return sum / static_cast<double>(take);
}

}  // namespace ruleguide
