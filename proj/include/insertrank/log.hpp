#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace insertrank::log {

/// Receives every warning emitted by the library. The default sink writes
/// "warning: <msg>" to stderr.
using Sink = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink and returns the previous one.
Sink set_warning_sink(Sink sink);

void warn(std::string_view message);

/// Informational messages go to stderr unless silenced.
void info(std::string_view message);
void set_quiet(bool quiet);

/// RAII capture of warnings, used by tests and by callers that want to
/// collect diagnostics instead of printing them.
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    [[nodiscard]] const std::vector<std::string>& messages() const { return messages_; }
    [[nodiscard]] bool contains(std::string_view needle) const;

private:
    std::vector<std::string> messages_;
    Sink previous_;
};

}  // namespace insertrank::log
