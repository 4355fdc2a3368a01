#pragma once

// cpp-httplib transport for HttpBackend. Kept apart from llm.hpp so that
// only code talking to a live endpoint pulls in httplib.

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "ruleguide/llm.hpp"

namespace ruleguide {

inline HttpTransport httplib_transport(const std::string& endpoint, int timeout_s) {
  std::string origin = split_endpoint(endpoint).first;
  return [origin, timeout_s](const HttpRequest& req) {
    httplib::Client cli(origin);
    cli.set_connection_timeout(timeout_s, 0);
    cli.set_read_timeout(timeout_s, 0);
    cli.set_write_timeout(timeout_s, 0);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : req.headers) {
      if (k == "Content-Type") content_type = v;
      else headers.emplace(k, v);
    }
    HttpResponse out;
    auto res = cli.Post(req.path, headers, req.body, content_type);
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  };
}

// Builds the configured backend. Credentials come only from the environment.
inline std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
  spec.validate();
  if (spec.kind == BackendSpec::Kind::Scripted) {
    return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(spec.replay_path));
  }
  std::string key;
  if (!spec.api_key_env.empty()) {
    if (const char* v = std::getenv(spec.api_key_env.c_str())) key = v;
  }
  return std::make_unique<HttpBackend>(spec, httplib_transport(spec.endpoint, spec.timeout_s), key);
}

}  // namespace ruleguide
