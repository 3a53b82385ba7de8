#pragma once

#include "rah/gateway/backend.hpp"

#include <array>
#include <atomic>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <string>

namespace rah {

/// Lowercase hex SHA-256 of the input.
std::string sha256_hex(std::string_view data);

/// Content-addressed response cache in front of another backend. One file
/// per key under `dir`; the key covers kind, payload, decode params and the
/// inner backend's identity. Unreadable entries are recomputed.
class CachedBackend final : public Backend {
public:
    CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir);

    AgentResponse complete(const AgentRequest& req) override;
    std::string identity() const override { return inner_->identity(); }

    std::string key(const AgentRequest& req) const;
    std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

    std::size_t hits() const noexcept { return hits_.load(); }
    std::size_t misses() const noexcept { return misses_.load(); }

private:
    std::shared_mutex& stripe(const std::string& key);

    std::shared_ptr<Backend> inner_;
    std::filesystem::path dir_;
    std::array<std::shared_mutex, 64> stripes_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
};

} // namespace rah
