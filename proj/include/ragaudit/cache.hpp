#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragaudit/core.hpp"
#include "ragaudit/judge.hpp"
#include "ragaudit/sha256.hpp"

namespace ragaudit {

// Identity of one completion: hash of everything that can change the output.
// Seed participates so repeated samples at distinct seeds cache separately.
struct CacheKey {
    std::array<std::uint8_t, 32> digest{};

    static CacheKey make(const std::string& backend, const std::string& model,
                         const std::string& prompt, double temperature,
                         std::optional<std::uint64_t> seed) {
        Sha256 h;
        auto feed = [&h](std::string_view part) {
            h.update(part);
            h.update(std::string_view("\0", 1));
        };
        feed("completion-cache-v1");
        feed(backend);
        feed(model);
        feed(prompt);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", temperature);
        feed(buf);
        if (seed) {
            std::snprintf(buf, sizeof(buf), "s%llu",
                          static_cast<unsigned long long>(*seed));
        } else {
            std::snprintf(buf, sizeof(buf), "n");
        }
        feed(buf);
        return CacheKey{h.finish()};
    }

    std::string hex() const { return Sha256::hex(digest); }

    friend bool operator==(const CacheKey& a, const CacheKey& b) = default;
    friend bool operator<(const CacheKey& a, const CacheKey& b) { return a.digest < b.digest; }
};

namespace detail {

inline void append_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string backend_log_name(const std::string& backend) {
    std::string safe;
    for (char c : backend) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '-' || c == '_';
        safe.push_back(ok ? c : '_');
    }
    if (safe.empty()) safe = "backend";
    std::array<std::uint8_t, 32> d = Sha256::hash(backend);
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "%02x%02x%02x%02x", d[0], d[1], d[2], d[3]);
    return safe + "-" + suffix + ".log";
}

}  // namespace ragaudit::detail

// Append-only completion store: one log file per backend, an in-memory index
// built when the directory is opened, and a flock'd lock file so only one
// process writes a directory at a time. Records are length-prefixed and
// checksummed; any damaged record surfaces as CorruptionError naming the
// file rather than being skipped.
class CompletionCache {
    static constexpr std::string_view kMagic = "RGC1";
    static constexpr std::uint32_t kMaxRecord = 1u << 30;

  public:
    explicit CompletionCache(const std::filesystem::path& dir) : dir_(dir) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw Error("cannot create cache directory " + dir_.string() + ": " + ec.message());
        std::filesystem::path lock_path = dir_ / "lock";
        lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
        if (lock_fd_ < 0) throw Error("cannot open cache lock file " + lock_path.string());
        if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(lock_fd_);
            lock_fd_ = -1;
            throw Error("cache directory " + dir_.string() + " is locked by another process");
        }
        for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
            if (entry.path().extension() == ".log") load_log(entry.path());
        }
    }

    CompletionCache(const CompletionCache&) = delete;
    CompletionCache& operator=(const CompletionCache&) = delete;

    ~CompletionCache() {
        for (auto& [name, fd] : fds_) {
            if (fd >= 0) ::close(fd);
        }
        if (lock_fd_ >= 0) ::close(lock_fd_);  // releases the flock
    }

    std::optional<RawCompletion> get(const CacheKey& key) const {
        std::lock_guard<std::mutex> guard(mu_);
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        RawCompletion out;
        out.text = it->second.text;
        out.backend = it->second.backend;
        out.latency_ms = 0;
        out.from_cache = true;
        return out;
    }

    // Durable on return (the record is written and fsync'd before the index
    // is updated). Duplicate keys: last writer wins.
    void put(const CacheKey& key, const std::string& backend, const std::string& text) {
        std::lock_guard<std::mutex> guard(mu_);
        std::string payload;
        payload.reserve(32 + 8 + backend.size() + text.size());
        payload.append(reinterpret_cast<const char*>(key.digest.data()), key.digest.size());
        detail::append_u32le(payload, static_cast<std::uint32_t>(backend.size()));
        payload += backend;
        detail::append_u32le(payload, static_cast<std::uint32_t>(text.size()));
        payload += text;

        std::string record;
        record.reserve(4 + payload.size() + 32);
        detail::append_u32le(record, static_cast<std::uint32_t>(payload.size()));
        record += payload;
        std::array<std::uint8_t, 32> sum = Sha256::hash(payload);
        record.append(reinterpret_cast<const char*>(sum.data()), sum.size());

        int fd = fd_for(backend);
        const char* p = record.data();
        std::size_t left = record.size();
        while (left > 0) {
            ssize_t n = ::write(fd, p, left);
            if (n < 0) throw Error("cache write failed for backend '" + backend + "'");
            p += n;
            left -= static_cast<std::size_t>(n);
        }
        if (::fsync(fd) != 0) throw Error("cache fsync failed for backend '" + backend + "'");
        index_[key] = Entry{backend, text};
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> guard(mu_);
        return index_.size();
    }

    const std::filesystem::path& directory() const { return dir_; }

  private:
    struct Entry {
        std::string backend;
        std::string text;
    };

    void load_log(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read cache log " + path.string());
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        auto corrupt = [&path](const std::string& why) -> CorruptionError {
            return CorruptionError("cache log " + path.string() + ": " + why);
        };
        if (data.size() < kMagic.size() || std::string_view(data).substr(0, kMagic.size()) != kMagic) {
            throw corrupt("bad magic");
        }
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data.data());
        std::size_t pos = kMagic.size();
        while (pos < data.size()) {
            if (data.size() - pos < 4) throw corrupt("truncated record length");
            std::uint32_t len = detail::read_u32le(bytes + pos);
            if (len < 40 || len > kMaxRecord) throw corrupt("implausible record length");
            if (data.size() - pos < 4 + static_cast<std::size_t>(len) + 32) {
                throw corrupt("truncated record");
            }
            const char* payload = data.data() + pos + 4;
            std::array<std::uint8_t, 32> want;
            std::memcpy(want.data(), payload + len, 32);
            if (Sha256::hash(std::string_view(payload, len)) != want) {
                throw corrupt("record checksum mismatch");
            }
            CacheKey key;
            std::memcpy(key.digest.data(), payload, 32);
            std::uint32_t backend_len = detail::read_u32le(bytes + pos + 4 + 32);
            if (36 + static_cast<std::size_t>(backend_len) + 4 > len) {
                throw corrupt("record field overflow");
            }
            std::uint32_t text_len = detail::read_u32le(bytes + pos + 4 + 36 + backend_len);
            if (40 + static_cast<std::size_t>(backend_len) + text_len != len) {
                throw corrupt("record length mismatch");
            }
            Entry e;
            e.backend.assign(payload + 36, backend_len);
            e.text.assign(payload + 40 + backend_len, text_len);
            index_[key] = std::move(e);
            pos += 4 + static_cast<std::size_t>(len) + 32;
        }
    }

    int fd_for(const std::string& backend) {
        auto it = fds_.find(backend);
        if (it != fds_.end()) return it->second;
        std::filesystem::path path = dir_ / detail::backend_log_name(backend);
        bool fresh = !std::filesystem::exists(path);
        int fd = ::open(path.c_str(), O_CREAT | O_WRONLY | O_APPEND | O_CLOEXEC, 0644);
        if (fd < 0) throw Error("cannot open cache log " + path.string());
        if (fresh) {
            if (::write(fd, kMagic.data(), kMagic.size()) !=
                static_cast<ssize_t>(kMagic.size())) {
                ::close(fd);
                throw Error("cannot initialize cache log " + path.string());
            }
        }
        fds_[backend] = fd;
        return fd;
    }

    std::filesystem::path dir_;
    int lock_fd_ = -1;
    mutable std::mutex mu_;
    std::map<CacheKey, Entry> index_;
    std::map<std::string, int> fds_;
};

}  // namespace ragaudit
