#pragma once

#include <string>
#include <vector>

namespace rover {

enum class ExecOutcome { Ok, Error, Timeout, BlockedImport };

struct ExecutionResult {
    std::string stdout_text;
    std::string stderr_text;
    ExecOutcome outcome = ExecOutcome::Ok;
    double wall_time_seconds = 0.0;
    std::string blocked_module;  // set for BlockedImport
};

struct SandboxConfig {
    // The payload language is a deployment choice; the default driver runs
    // Python source on the local interpreter.
    std::string interpreter = "python3";
    std::vector<std::string> blocked_modules = {
        "os",  "sys", "subprocess", "socket",  "signal", "multiprocessing", "threading",
        "ssl", "pdb", "resource",   "xmlrpc",  "io",     "pathlib",         "shutil",
        "ctypes"};
    double timeout_seconds = 300.0;
    int max_parallel = 4;
};

/// Stateless per-call sandbox: every run() spawns a fresh interpreter process
/// with an import guard over the blocked module list, file access disabled,
/// and a hard wall-clock kill. Nothing is shared between executions.
class CodeSandbox {
public:
    explicit CodeSandbox(SandboxConfig config = {});

    ExecutionResult run(const std::string& code) const;

    const SandboxConfig& config() const { return config_; }

private:
    SandboxConfig config_;
};

}  // namespace rover
