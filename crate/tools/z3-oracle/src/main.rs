//! Feeds an SMT-LIB v2 script to an embedded Z3 and prints whatever the
//! solver answers. Accepts a file argument or `-in` for stdin, mirroring the
//! flags the real `z3` binary takes so either can be dropped into a solver
//! profile unchanged.

use std::ffi::{CStr, CString};
use std::io::Read;
use std::process::exit;

use z3_sys::{
    ErrorCode, Z3_context, Z3_del_config, Z3_del_context, Z3_eval_smtlib2_string,
    Z3_global_param_set, Z3_mk_config, Z3_mk_context, Z3_set_error_handler,
};

/// Keeps script-level errors (such as get-model after unsat) from killing
/// the process: the default handler prints "Error: ..." and exits. With a
/// no-op handler the evaluator appends an (error "...") line to its output
/// instead, which callers can skip past.
unsafe extern "C" fn ignore_error(_ctx: Z3_context, _code: ErrorCode) {}

fn usage() -> ! {
    eprintln!("usage: storm-z3 [-in] [-smt2] [-t:<ms>] [-T:<sec>] [file]");
    exit(2);
}

fn set_timeout_ms(ms: u64) {
    let key = CString::new("timeout").unwrap();
    let val = CString::new(ms.to_string()).unwrap();
    unsafe { Z3_global_param_set(key.as_ptr(), val.as_ptr()) };
}

fn main() {
    let mut file: Option<String> = None;
    let mut from_stdin = false;
    for arg in std::env::args().skip(1) {
        if arg == "-in" {
            from_stdin = true;
        } else if arg == "-smt2" {
            // accepted for z3 compatibility; SMT-LIB is the only input language
        } else if let Some(ms) = arg.strip_prefix("-t:") {
            match ms.parse::<u64>() {
                Ok(ms) => set_timeout_ms(ms),
                Err(_) => usage(),
            }
        } else if let Some(sec) = arg.strip_prefix("-T:") {
            match sec.parse::<u64>() {
                Ok(sec) => set_timeout_ms(sec.saturating_mul(1000)),
                Err(_) => usage(),
            }
        } else if arg.starts_with('-') {
            usage();
        } else if file.is_some() {
            usage();
        } else {
            file = Some(arg);
        }
    }

    let mut script = String::new();
    match &file {
        Some(path) if !from_stdin => match std::fs::read_to_string(path) {
            Ok(text) => script = text,
            Err(err) => {
                eprintln!("storm-z3: {path}: {err}");
                exit(3);
            }
        },
        _ => {
            if std::io::stdin().read_to_string(&mut script).is_err() {
                eprintln!("storm-z3: stdin is not valid UTF-8");
                exit(3);
            }
        }
    }

    // Embedded NUL bytes cannot cross the C boundary; nothing legal in
    // SMT-LIB contains them.
    let script = match CString::new(script) {
        Ok(s) => s,
        Err(_) => {
            eprintln!("storm-z3: input contains a NUL byte");
            exit(3);
        }
    };

    unsafe {
        let cfg = Z3_mk_config();
        let ctx = Z3_mk_context(cfg);
        Z3_del_config(cfg);
        Z3_set_error_handler(ctx, Some(ignore_error));
        let out = Z3_eval_smtlib2_string(ctx, script.as_ptr());
        if !out.is_null() {
            let text = CStr::from_ptr(out).to_string_lossy();
            if !text.is_empty() {
                println!("{}", text.trim_end());
            }
        }
        Z3_del_context(ctx);
    }
}
