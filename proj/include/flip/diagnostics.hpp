#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace flip {

// Non-fatal conditions (clamped k, skipped rows, short candidate lists) are
// reported through a process-wide sink so that tests and the CLI can
// capture them.
using WarningSink = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& warning_mutex() {
    static std::mutex m;
    return m;
}
inline WarningSink& warning_sink() {
    static WarningSink sink = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return sink;
}
}  // namespace detail

inline WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(detail::warning_mutex());
    return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(const std::string& msg) {
    std::lock_guard lock(detail::warning_mutex());
    if (detail::warning_sink()) detail::warning_sink()(msg);
}

// RAII capture used by tests: collects warnings for the lifetime of the object.
class ScopedWarningCapture {
public:
    ScopedWarningCapture()
        : previous_(set_warning_sink([this](const std::string& m) { messages_.push_back(m); })) {}
    ~ScopedWarningCapture() { set_warning_sink(std::move(previous_)); }
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }

private:
    std::vector<std::string> messages_;
    WarningSink previous_;
};

}  // namespace flip
