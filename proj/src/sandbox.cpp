#include "rover/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>

namespace rover {

namespace {

// Reads the payload from stdin, installs the import guard and disables file
// access, then executes the payload in a clean global namespace. Exit code 43
// marks a blocked import that escaped the payload.
const char* kDriver = R"PY(
import sys, traceback, builtins
blocked = set(sys.argv[1].split(',')) if len(sys.argv) > 1 and sys.argv[1] else set()
code = sys.stdin.read()
real_import = builtins.__import__
def guarded_import(name, *args, **kwargs):
    root = name.split('.')[0]
    if root in blocked:
        raise ImportError('blocked import: ' + root)
    return real_import(name, *args, **kwargs)
builtins.__import__ = guarded_import
def no_open(*args, **kwargs):
    raise PermissionError('file system access is disabled')
builtins.open = no_open
scope = {'__name__': '__main__', '__builtins__': builtins.__dict__}
try:
    exec(compile(code, '<code>', 'exec'), scope)
except SystemExit as e:
    sys.exit(0 if e.code in (None, 0) else 1)
except ImportError as e:
    if str(e).startswith('blocked import: '):
        print(str(e), file=sys.stderr)
        sys.exit(43)
    traceback.print_exc()
    sys.exit(1)
except BaseException:
    traceback.print_exc()
    sys.exit(1)
)PY";

constexpr int kBlockedImportExit = 43;

struct Pipe {
    int fds[2] = {-1, -1};
    bool open() { return ::pipe(fds) == 0; }
    void close_read() { if (fds[0] >= 0) { ::close(fds[0]); fds[0] = -1; } }
    void close_write() { if (fds[1] >= 0) { ::close(fds[1]); fds[1] = -1; } }
    ~Pipe() { close_read(); close_write(); }
};

struct SpawnResult {
    int exit_code = -1;
    bool timed_out = false;
    bool spawn_failed = false;
    std::string out;
    std::string err;
    double elapsed = 0.0;
};

SpawnResult run_with_timeout(const std::vector<std::string>& argv, const std::string& stdin_data,
                             double timeout_seconds) {
    SpawnResult result;
    Pipe in, out, err;
    if (!in.open() || !out.open() || !err.open()) {
        result.spawn_failed = true;
        return result;
    }

    const auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) {
        result.spawn_failed = true;
        return result;
    }
    if (pid == 0) {
        ::setpgid(0, 0);  // own process group so a timeout kill reaps children too
        ::dup2(in.fds[0], STDIN_FILENO);
        ::dup2(out.fds[1], STDOUT_FILENO);
        ::dup2(err.fds[1], STDERR_FILENO);
        for (int fd : {in.fds[0], in.fds[1], out.fds[0], out.fds[1], err.fds[0], err.fds[1]})
            ::close(fd);
        std::vector<char*> cargv;
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        ::execvp(cargv[0], cargv.data());
        _exit(127);
    }

    in.close_read();
    out.close_write();
    err.close_write();
    ::fcntl(in.fds[1], F_SETFL, O_NONBLOCK);

    std::size_t written = 0;
    bool stdin_open = true;
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(timeout_seconds));

    while (true) {
        if (stdin_open && written >= stdin_data.size()) {
            in.close_write();
            stdin_open = false;
        }
        pollfd fds[3];
        int nfds = 0;
        int out_idx = -1, err_idx = -1, in_idx = -1;
        if (out.fds[0] >= 0) { fds[nfds] = {out.fds[0], POLLIN, 0}; out_idx = nfds++; }
        if (err.fds[0] >= 0) { fds[nfds] = {err.fds[0], POLLIN, 0}; err_idx = nfds++; }
        if (stdin_open) { fds[nfds] = {in.fds[1], POLLOUT, 0}; in_idx = nfds++; }
        if (nfds == 0) break;

        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            result.timed_out = true;
            break;
        }
        const int wait_ms = static_cast<int>(std::min<long long>(
            250, std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1));
        const int rc = ::poll(fds, static_cast<nfds_t>(nfds), wait_ms);
        if (rc < 0 && errno != EINTR) break;
        if (rc <= 0) continue;

        char buf[4096];
        if (out_idx >= 0 && (fds[out_idx].revents & (POLLIN | POLLHUP))) {
            ssize_t n = ::read(out.fds[0], buf, sizeof(buf));
            if (n > 0) result.out.append(buf, static_cast<std::size_t>(n));
            else out.close_read();
        }
        if (err_idx >= 0 && (fds[err_idx].revents & (POLLIN | POLLHUP))) {
            ssize_t n = ::read(err.fds[0], buf, sizeof(buf));
            if (n > 0) result.err.append(buf, static_cast<std::size_t>(n));
            else err.close_read();
        }
        if (in_idx >= 0 && (fds[in_idx].revents & (POLLOUT | POLLERR | POLLHUP))) {
            if (fds[in_idx].revents & (POLLERR | POLLHUP)) {
                in.close_write();
                stdin_open = false;
            } else {
                ssize_t n = ::write(in.fds[1], stdin_data.data() + written,
                                    stdin_data.size() - written);
                if (n > 0) written += static_cast<std::size_t>(n);
                else if (n < 0 && errno != EAGAIN && errno != EINTR) {
                    in.close_write();
                    stdin_open = false;
                }
            }
        }
    }

    if (result.timed_out) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    else result.exit_code = -1;
    result.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

// Bounded parallel executions without pulling in a semaphore per sandbox
// instance; the pool is process-wide.
class ExecSlots {
public:
    void acquire(int limit) {
        std::unique_lock lk(m_);
        cv_.wait(lk, [&] { return active_ < limit; });
        ++active_;
    }
    void release() {
        {
            std::lock_guard lk(m_);
            --active_;
        }
        cv_.notify_one();
    }
    static ExecSlots& instance() {
        static ExecSlots slots;
        return slots;
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    int active_ = 0;
};

}  // namespace

CodeSandbox::CodeSandbox(SandboxConfig config) : config_(std::move(config)) {}

ExecutionResult CodeSandbox::run(const std::string& code) const {
    ExecutionResult result;
    std::vector<std::string> argv = {config_.interpreter, "-I", "-c", kDriver,
                                     join(config_.blocked_modules, ',')};

    ExecSlots::instance().acquire(std::max(1, config_.max_parallel));
    SpawnResult spawn = run_with_timeout(argv, code, config_.timeout_seconds);
    ExecSlots::instance().release();

    result.stdout_text = std::move(spawn.out);
    result.stderr_text = std::move(spawn.err);
    result.wall_time_seconds = spawn.elapsed;
    if (spawn.spawn_failed) {
        result.outcome = ExecOutcome::Error;
        result.stderr_text = "sandbox: failed to spawn interpreter process";
        return result;
    }
    if (spawn.timed_out) {
        result.outcome = ExecOutcome::Timeout;
        return result;
    }
    if (spawn.exit_code == kBlockedImportExit) {
        result.outcome = ExecOutcome::BlockedImport;
        const std::string marker = "blocked import: ";
        std::size_t pos = result.stderr_text.find(marker);
        if (pos != std::string::npos) {
            std::size_t begin = pos + marker.size();
            std::size_t end = result.stderr_text.find_first_of("\r\n", begin);
            result.blocked_module = result.stderr_text.substr(
                begin, end == std::string::npos ? std::string::npos : end - begin);
        }
        return result;
    }
    result.outcome = (spawn.exit_code == 0) ? ExecOutcome::Ok : ExecOutcome::Error;
    return result;
}

}  // namespace rover
