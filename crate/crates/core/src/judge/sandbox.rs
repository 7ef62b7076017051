//! Compilation and resource-limited execution of untrusted programs.
//!
//! Each run gets a fresh private working directory, an empty environment,
//! its own session (so the whole process group can be killed), an
//! address-space cap at the memory limit, and, where the kernel allows
//! unprivileged user namespaces, a network namespace with no interfaces.
//! Wall-clock time is polled by the parent and the group is killed once the
//! limit passes.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ExecutionResult, ExitStatus, Verdict};
use crate::corpus::Limits;

pub const DEFAULT_OUTPUT_CAP: usize = 16 * 1024 * 1024;
const STDERR_CAP: usize = 64 * 1024;
const DIAGNOSTICS_CAP: usize = 16 * 1024;
const FILE_SIZE_CAP: u64 = 64 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("toolchain command `{0}` not found")]
    ToolchainMissing(String),
    #[error("invalid toolchain profile `{0}`")]
    BadProfile(String),
    #[error("unknown toolchain profile `{0}`")]
    UnknownProfile(String),
    #[error("sandbox failure: {0}")]
    Spawn(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("compilation failed:\n{diagnostics}")]
    Diagnostics { diagnostics: String },
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// A named compile command. `{src}` and `{out}` are replaced by the source
/// and output paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolchainProfile {
    pub name: String,
    pub compile: String,
    #[serde(default = "default_ext")]
    pub source_ext: String,
    #[serde(default = "default_compile_timeout")]
    pub compile_timeout_ms: u64,
}

fn default_ext() -> String {
    "cpp".into()
}

fn default_compile_timeout() -> u64 {
    60_000
}

impl Default for ToolchainProfile {
    fn default() -> Self {
        Self::cpp17()
    }
}

impl ToolchainProfile {
    pub fn cpp17() -> Self {
        Self {
            name: "cpp17".into(),
            compile: "g++ -std=c++17 -O2 -pipe -o {out} {src}".into(),
            source_ext: default_ext(),
            compile_timeout_ms: default_compile_timeout(),
        }
    }

    fn argv(&self, src: &Path, out: &Path) -> Result<Vec<OsString>, SandboxError> {
        let words = shlex::split(&self.compile)
            .filter(|w| !w.is_empty())
            .ok_or_else(|| SandboxError::BadProfile(self.name.clone()))?;
        Ok(words
            .into_iter()
            .map(|w| match w.as_str() {
                "{src}" => src.as_os_str().to_owned(),
                "{out}" => out.as_os_str().to_owned(),
                _ => OsString::from(
                    w.replace("{src}", &src.to_string_lossy())
                        .replace("{out}", &out.to_string_lossy()),
                ),
            })
            .collect())
    }

    /// Cache key for a source compiled under this profile.
    pub fn source_key(&self, source: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.compile.as_bytes());
        h.update([0]);
        h.update(source.as_bytes());
        h.finalize().into()
    }
}

/// A runnable binary living in its own temporary directory. Cloning shares
/// the directory; it is removed when the last clone drops.
#[derive(Debug, Clone)]
pub struct CompiledArtifact {
    dir: Arc<tempfile::TempDir>,
    binary: PathBuf,
}

impl CompiledArtifact {
    pub fn binary(&self) -> &Path {
        &self.binary
    }

    pub fn dir(&self) -> &Path {
        self.dir.path()
    }
}

fn read_capped<R: Read + Send + 'static>(
    mut reader: R,
    cap: usize,
    overflow: Option<Arc<AtomicBool>>,
) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut chunk = [0u8; 64 * 1024];
        loop {
            match reader.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&chunk[..n.min(room)]);
                    if n > room {
                        if let Some(flag) = &overflow {
                            flag.store(true, Ordering::SeqCst);
                        }
                    }
                }
            }
        }
        kept
    })
}

fn truncate_lossy(bytes: &[u8], cap: usize) -> String {
    let mut s = String::from_utf8_lossy(&bytes[..bytes.len().min(cap)]).into_owned();
    if bytes.len() > cap {
        s.push_str("\n[truncated]");
    }
    s
}

/// Compiles `source` into a fresh temporary directory.
pub fn compile_source(
    source: &str,
    profile: &ToolchainProfile,
) -> Result<CompiledArtifact, CompileError> {
    if source.trim().is_empty() {
        return Err(CompileError::Diagnostics {
            diagnostics: "empty source".into(),
        });
    }
    let dir = tempfile::Builder::new()
        .prefix("cpbench-build-")
        .tempdir()
        .map_err(SandboxError::from)?;
    let src_name = format!("main.{}", profile.source_ext);
    let out = dir.path().join("main");
    std::fs::write(dir.path().join(&src_name), source).map_err(SandboxError::from)?;
    let argv = profile.argv(Path::new(&src_name), Path::new("./main"))?;
    let mut child = match Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(
                SandboxError::ToolchainMissing(argv[0].to_string_lossy().into_owned()).into(),
            )
        }
        Err(e) => return Err(SandboxError::Spawn(e).into()),
    };
    let out_reader = read_capped(child.stdout.take().expect("piped"), DIAGNOSTICS_CAP, None);
    let err_reader = read_capped(child.stderr.take().expect("piped"), DIAGNOSTICS_CAP, None);
    let deadline = Instant::now() + Duration::from_millis(profile.compile_timeout_ms);
    let status = loop {
        if let Some(status) = child.try_wait().map_err(SandboxError::from)? {
            break Some(status);
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let mut diag = out_reader.join().unwrap_or_default();
    diag.extend(err_reader.join().unwrap_or_default());
    match status {
        None => Err(CompileError::Diagnostics {
            diagnostics: format!("compilation exceeded {} ms", profile.compile_timeout_ms),
        }),
        Some(s) if s.success() && out.is_file() => Ok(CompiledArtifact {
            dir: Arc::new(dir),
            binary: out,
        }),
        Some(s) => {
            let mut diagnostics = truncate_lossy(&diag, DIAGNOSTICS_CAP);
            if diagnostics.trim().is_empty() {
                diagnostics = format!("compiler exited with {s}");
            }
            Err(CompileError::Diagnostics { diagnostics })
        }
    }
}

/// Knobs for the execution sandbox.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxOptions {
    /// Stdout bytes kept before the run is killed with verdict `Other`.
    pub output_cap: usize,
    /// Put the child in an empty network namespace when the kernel permits.
    pub isolate_network: bool,
}

impl Default for SandboxOptions {
    fn default() -> Self {
        Self {
            output_cap: DEFAULT_OUTPUT_CAP,
            isolate_network: true,
        }
    }
}

/// Whether unprivileged network namespaces work here. Probed once.
pub fn network_isolation_available() -> bool {
    static PROBE: OnceLock<bool> = OnceLock::new();
    *PROBE.get_or_init(|| {
        let mut cmd = Command::new("/bin/true");
        unsafe {
            cmd.pre_exec(|| {
                if libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
                Ok(())
            });
        }
        let ok = cmd
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false);
        if !ok {
            log::warn!("network namespaces unavailable; candidate programs keep host networking");
        }
        ok
    })
}

fn set_limit(resource: libc::__rlimit_resource_t, value: u64) -> std::io::Result<()> {
    let lim = libc::rlimit {
        rlim_cur: value as libc::rlim_t,
        rlim_max: value as libc::rlim_t,
    };
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(())
}

fn signal_name(sig: i32) -> String {
    let name = match sig {
        libc::SIGABRT => "SIGABRT",
        libc::SIGSEGV => "SIGSEGV",
        libc::SIGFPE => "SIGFPE",
        libc::SIGKILL => "SIGKILL",
        libc::SIGBUS => "SIGBUS",
        libc::SIGILL => "SIGILL",
        libc::SIGXCPU => "SIGXCPU",
        libc::SIGXFSZ => "SIGXFSZ",
        libc::SIGPIPE => "SIGPIPE",
        libc::SIGTERM => "SIGTERM",
        _ => return format!("signal {sig}"),
    };
    name.to_string()
}

fn looks_like_oom(stderr: &[u8]) -> bool {
    let text = String::from_utf8_lossy(stderr);
    [
        "std::bad_alloc",
        "Cannot allocate memory",
        "out of memory",
        "MemoryError",
    ]
    .iter()
    .any(|m| text.contains(m))
}

/// Runs `artifact` with `input` on stdin under `limits`.
pub fn run_with_limits(
    artifact: &CompiledArtifact,
    input: &[u8],
    limits: Limits,
    options: SandboxOptions,
) -> Result<ExecutionResult, SandboxError> {
    run_with_args(artifact, &[], input, limits, options)
}

/// Like [`run_with_limits`], passing `args` on the command line.
pub fn run_with_args(
    artifact: &CompiledArtifact,
    args: &[String],
    input: &[u8],
    limits: Limits,
    options: SandboxOptions,
) -> Result<ExecutionResult, SandboxError> {
    let workdir = tempfile::Builder::new().prefix("cpbench-run-").tempdir()?;
    let mem_bytes = limits.memory_limit_mib * 1024 * 1024;
    let cpu_secs = limits.time_limit_ms.div_ceil(1000) + 1;
    let isolate_net = options.isolate_network && network_isolation_available();

    let mut cmd = Command::new(artifact.binary());
    cmd.args(args)
        .current_dir(workdir.path())
        .env_clear()
        .env("PATH", "/usr/bin:/bin")
        .env("HOME", workdir.path())
        .env("TMPDIR", workdir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    unsafe {
        cmd.pre_exec(move || {
            if libc::setsid() == -1 {
                return Err(std::io::Error::last_os_error());
            }
            if isolate_net && libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            set_limit(libc::RLIMIT_CORE, 0)?;
            set_limit(libc::RLIMIT_FSIZE, FILE_SIZE_CAP)?;
            set_limit(libc::RLIMIT_CPU, cpu_secs)?;
            set_limit(libc::RLIMIT_AS, mem_bytes)?;
            Ok(())
        });
    }

    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pid = child.id() as libc::pid_t;

    let mut stdin = child.stdin.take().expect("piped");
    let input = input.to_vec();
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let overflow = Arc::new(AtomicBool::new(false));
    let out_reader = read_capped(
        child.stdout.take().expect("piped"),
        options.output_cap,
        Some(overflow.clone()),
    );
    let err_reader = read_capped(child.stderr.take().expect("piped"), STDERR_CAP, None);

    let limit = Duration::from_millis(limits.time_limit_ms);
    let mut status: libc::c_int = 0;
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let mut timed_out = false;
    let mut killed_for_output = false;
    loop {
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
        if r == pid {
            break;
        }
        if r == -1 {
            let err = std::io::Error::last_os_error();
            if err.kind() == std::io::ErrorKind::Interrupted {
                continue;
            }
            unsafe { libc::killpg(pid, libc::SIGKILL) };
            return Err(SandboxError::Spawn(err));
        }
        let elapsed = start.elapsed();
        let over_time = elapsed > limit;
        let over_output = overflow.load(Ordering::SeqCst);
        if over_time || over_output {
            timed_out |= over_time;
            killed_for_output |= over_output && !over_time;
            unsafe { libc::killpg(pid, libc::SIGKILL) };
            loop {
                let r = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
                if r == pid
                    || (r == -1
                        && std::io::Error::last_os_error().kind()
                            != std::io::ErrorKind::Interrupted)
                {
                    break;
                }
            }
            break;
        }
        let remaining = limit.saturating_sub(elapsed);
        thread::sleep(remaining.clamp(Duration::from_micros(200), Duration::from_millis(2)));
    }
    let wall = start.elapsed();
    // Leftover grandchildren would otherwise hold the pipes open.
    unsafe { libc::killpg(pid, libc::SIGKILL) };
    drop(child);
    let _ = writer.join();
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();

    let exit = if libc::WIFSIGNALED(status) {
        ExitStatus::Signal(signal_name(libc::WTERMSIG(status)))
    } else {
        ExitStatus::Code(libc::WEXITSTATUS(status))
    };
    let abnormal = !matches!(exit, ExitStatus::Code(0));
    let wall_time_ms = wall.as_millis() as u64;
    let mut peak_memory_mib = usage.ru_maxrss as f64 / 1024.0;
    let mem_limit = limits.memory_limit_mib as f64;

    let verdict = if killed_for_output || overflow.load(Ordering::SeqCst) {
        Verdict::Other
    } else if timed_out
        || wall_time_ms > limits.time_limit_ms
        || (libc::WIFSIGNALED(status) && libc::WTERMSIG(status) == libc::SIGXCPU)
    {
        Verdict::TimeLimit
    } else if peak_memory_mib >= mem_limit {
        Verdict::MemoryLimit
    } else if abnormal && looks_like_oom(&stderr) {
        // The address-space cap refused an allocation: the program asked for
        // at least the whole budget.
        peak_memory_mib = peak_memory_mib.max(mem_limit);
        Verdict::MemoryLimit
    } else if abnormal {
        Verdict::RuntimeError
    } else {
        Verdict::Accepted
    };

    Ok(ExecutionResult {
        verdict,
        stdout,
        stderr,
        wall_time_ms: wall_time_ms.max(if verdict == Verdict::TimeLimit {
            limits.time_limit_ms
        } else {
            0
        }),
        peak_memory_mib,
        exit,
    })
}
