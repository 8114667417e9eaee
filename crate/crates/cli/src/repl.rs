//! Line-oriented chat loop.

use std::io::{self, BufRead, Write};

use pidrag::chat::{ask, ChatProvider, ChatSession, Role};

pub const PROMPT: &str = "> ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub question: String,
    pub answer: Result<String, String>,
}

/// Reads questions from `input` until EOF or `/quit`, streaming each answer
/// to `out` as it arrives. `/history` prints the conversation so far. A
/// failed answer is reported and the loop continues with the history as it
/// was before the question.
pub async fn run_repl<R: BufRead, W: Write + Send>(
    session: &mut ChatSession,
    provider: &dyn ChatProvider,
    input: R,
    out: &mut W,
) -> io::Result<Vec<Turn>> {
    let mut turns = Vec::new();
    write!(out, "{PROMPT}")?;
    out.flush()?;
    for line in input.lines() {
        let line = line?;
        let question = line.trim();
        match question {
            "" => {}
            "/quit" | "/exit" => break,
            "/history" => {
                for m in &session.history {
                    let who = if m.role == Role::User { "you" } else { "assistant" };
                    writeln!(out, "[{who}] {}", m.content)?;
                }
            }
            _ => {
                let mut write_err = None;
                let result = ask(session, question, provider, |chunk| {
                    if write_err.is_none() {
                        if let Err(e) = out.write_all(chunk.as_bytes()).and_then(|_| out.flush()) {
                            write_err = Some(e);
                        }
                    }
                })
                .await;
                if let Some(e) = write_err {
                    return Err(e);
                }
                let answer = match result {
                    Ok(reply) => {
                        writeln!(out)?;
                        Ok(reply.content)
                    }
                    Err(e) => {
                        writeln!(out)?;
                        writeln!(out, "[error] {e}")?;
                        Err(e.to_string())
                    }
                };
                turns.push(Turn {
                    question: question.to_string(),
                    answer,
                });
            }
        }
        write!(out, "{PROMPT}")?;
        out.flush()?;
    }
    writeln!(out)?;
    Ok(turns)
}
