// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <memory>

#include <curl/curl.h>
#include <fmt/format.h>

#include "augloop/gateway.hpp"

namespace augloop {

namespace {

std::size_t append_body(char* data, std::size_t size, std::size_t count, void* user) {
  static_cast<std::string*>(user)->append(data, size * count);
  return size * count;
}

struct CurlGlobal {
  CurlGlobal() { curl_global_init(CURL_GLOBAL_DEFAULT); }
  ~CurlGlobal() { curl_global_cleanup(); }
};

}  // namespace

HttpProvider::HttpProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.endpoint_url.empty()) throw ValidationError("BAD_CONFIG", "http provider needs an endpoint_url");
  static CurlGlobal global;
}

ProviderReply HttpProvider::complete(const std::vector<ChatMessage>& messages) {
  nlohmann::json body{{"model", cfg_.model_identifier}, {"temperature", 0}};
  auto& msgs = body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  const std::string payload = body.dump();

  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) throw ProviderError("PROVIDER_HTTP", "curl_easy_init failed");
  curl_slist* headers = curl_slist_append(nullptr, "Content-Type: application/json");
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers = curl_slist_append(headers, fmt::format("Authorization: Bearer {}", key).c_str());
    }
  }
  std::unique_ptr<curl_slist, decltype(&curl_slist_free_all)> header_guard(headers, curl_slist_free_all);

  std::string response;
  CURL* h = curl.get();
  curl_easy_setopt(h, CURLOPT_URL, cfg_.endpoint_url.c_str());
  curl_easy_setopt(h, CURLOPT_HTTPHEADER, headers);
  curl_easy_setopt(h, CURLOPT_POSTFIELDS, payload.c_str());
  curl_easy_setopt(h, CURLOPT_POSTFIELDSIZE, static_cast<long>(payload.size()));
  curl_easy_setopt(h, CURLOPT_TIMEOUT_MS, static_cast<long>(cfg_.timeout_s * 1000.0));
  curl_easy_setopt(h, CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(h, CURLOPT_WRITEFUNCTION, append_body);
  curl_easy_setopt(h, CURLOPT_WRITEDATA, &response);

  const CURLcode rc = curl_easy_perform(h);
  if (rc == CURLE_OPERATION_TIMEDOUT) {
    throw ProviderError("PROVIDER_TIMEOUT", fmt::format("no reply within {} s", cfg_.timeout_s));
  }
  if (rc != CURLE_OK) throw ProviderError("PROVIDER_HTTP", curl_easy_strerror(rc), 0);
  long status = 0;
  curl_easy_getinfo(h, CURLINFO_RESPONSE_CODE, &status);
  if (status < 200 || status >= 300) {
    throw ProviderError("PROVIDER_HTTP", fmt::format("endpoint answered HTTP {}", status), static_cast<int>(status));
  }

  const auto doc = nlohmann::json::parse(response, nullptr, false);
  const nlohmann::json* content = nullptr;
  if (doc.is_object() && doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
    const auto& first = doc["choices"][0];
    if (first.contains("message") && first["message"].contains("content") && first["message"]["content"].is_string()) {
      content = &first["message"]["content"];
    }
  }
  if (content == nullptr) {
    throw ProviderError("PROVIDER_HTTP", "response has no choices[0].message.content",
                        static_cast<int>(status));
  }
  ProviderReply reply{content->get<std::string>(), 0.0};
  if (doc.contains("usage") && doc["usage"].is_object()) {
    const auto& u = doc["usage"];
    const double in = u.value("prompt_tokens", 0.0);
    const double out = u.value("completion_tokens", 0.0);
    reply.cost = (in * cfg_.price_input_per_mtok + out * cfg_.price_output_per_mtok) / 1e6;
  } else {
    reply.cost = estimate_cost(messages, reply.content, cfg_);
  }
  return reply;
}

}  // namespace augloop
