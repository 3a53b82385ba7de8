#include "rah/gateway/cache.hpp"

#include "rah/rng.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <mutex>
#include <sstream>

namespace rah {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    if (!inner_) throw ConfigError("cached backend needs an inner backend");
    std::filesystem::create_directories(dir_);
}

std::string CachedBackend::key(const AgentRequest& req) const {
    nlohmann::json j{{"backend", inner_->identity()}, {"request", request_to_json(req)}};
    return sha256_hex(j.dump());
}

std::shared_mutex& CachedBackend::stripe(const std::string& key) {
    return stripes_[stable_hash(key) % stripes_.size()];
}

namespace {

std::optional<AgentResponse> read_entry(const std::filesystem::path& path, AgentKind expected) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        auto resp = response_from_json(nlohmann::json::parse(ss.str()));
        if (resp.kind() != expected) throw DecodeError("cached response has the wrong kind");
        return resp;
    } catch (const std::exception& e) {
        spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
        return std::nullopt;
    }
}

} // namespace

AgentResponse CachedBackend::complete(const AgentRequest& req) {
    const auto k = key(req);
    const auto path = path_for(k);
    auto& mtx = stripe(k);
    {
        std::shared_lock lock(mtx);
        if (auto hit = read_entry(path, req.kind())) {
            ++hits_;
            return *hit;
        }
    }
    std::unique_lock lock(mtx);
    if (auto hit = read_entry(path, req.kind())) {
        ++hits_;
        return *hit;
    }
    ++misses_;
    auto resp = inner_->complete(req);
    // Write to a temporary name and rename so readers never see a partial file.
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        os << response_to_json(resp).dump();
        if (!os) throw RunError("cannot write cache entry " + tmp);
    }
    std::filesystem::rename(tmp, path);
    return resp;
}

} // namespace rah
