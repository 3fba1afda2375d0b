#pragma once

#include <cctype>
#include <cstdio>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ragaudit {

// Base error for everything raised by this library. The CLI maps
// ConfigError to exit code 2 and every other Error to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or missing configuration: unknown format ids, unreadable paths,
// malformed config files.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A record or file failed to parse. Messages carry line numbers.
class ParseError : public Error {
public:
    using Error::Error;
};

// A prompt template was rendered without one of its required slots.
class TemplateError : public Error {
public:
    using Error::Error;
};

// The rendered prompt does not fit the backend context window.
class ContextOverflowError : public Error {
public:
    using Error::Error;
};

// A retryable backend transport failure (HTTP errors, timeouts).
class TransportError : public Error {
public:
    using Error::Error;
};

// A cache record failed its checksum or was truncated.
class CorruptionError : public Error {
public:
    using Error::Error;
};

// A pipeline stage was started before its upstream artifacts exist.
class MissingInputError : public Error {
public:
    using Error::Error;
};

using WarnHandler = std::function<void(const std::string&)>;

namespace detail {

inline std::mutex& warn_mutex() {
    static std::mutex m;
    return m;
}

inline WarnHandler& warn_handler_ref() {
    static WarnHandler handler;  // empty -> default stderr
    return handler;
}

}  // namespace detail

// Install a warning handler (tests capture warnings this way). Passing an
// empty handler restores the default, which prints to stderr.
inline void set_warn_handler(WarnHandler handler) {
    std::lock_guard<std::mutex> lock(detail::warn_mutex());
    detail::warn_handler_ref() = std::move(handler);
}

inline void warn(const std::string& message) {
    WarnHandler handler;
    {
        std::lock_guard<std::mutex> lock(detail::warn_mutex());
        handler = detail::warn_handler_ref();
    }
    if (handler) {
        handler(message);
    } else {
        std::fputs(("warning: " + message + "\n").c_str(), stderr);
    }
}

// RAII warning capture for tests. Default-constructed it collects into its
// own buffer; pass a sink to collect somewhere else.
class ScopedWarnCapture {
public:
    ScopedWarnCapture() : ScopedWarnCapture(nullptr) {}
    explicit ScopedWarnCapture(std::vector<std::string>* sink) {
        std::vector<std::string>* target = sink ? sink : &owned_;
        set_warn_handler([target](const std::string& msg) { target->push_back(msg); });
    }
    ~ScopedWarnCapture() { set_warn_handler({}); }
    ScopedWarnCapture(const ScopedWarnCapture&) = delete;
    ScopedWarnCapture& operator=(const ScopedWarnCapture&) = delete;

    const std::vector<std::string>& messages() const { return owned_; }

private:
    std::vector<std::string> owned_;
};

inline std::string_view trim_view(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Case-insensitive substring search; npos when absent.
inline std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0) {
    if (needle.empty()) return from <= haystack.size() ? from : std::string_view::npos;
    if (haystack.size() < needle.size()) return std::string_view::npos;
    for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
        bool hit = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (std::tolower(static_cast<unsigned char>(haystack[i + j])) !=
                std::tolower(static_cast<unsigned char>(needle[j]))) {
                hit = false;
                break;
            }
        }
        if (hit) return i;
    }
    return std::string_view::npos;
}

inline bool icontains(std::string_view haystack, std::string_view needle) {
    return ifind(haystack, needle) != std::string_view::npos;
}

// Last occurrence, case-insensitive; npos when absent.
inline std::size_t irfind(std::string_view haystack, std::string_view needle) {
    std::size_t best = std::string_view::npos;
    std::size_t pos = ifind(haystack, needle);
    while (pos != std::string_view::npos) {
        best = pos;
        pos = ifind(haystack, needle, pos + 1);
    }
    return best;
}

}  // namespace ragaudit
