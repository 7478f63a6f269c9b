//! Running agents out of process over the line protocol, via a child
//! process's stdin/stdout or a TCP connection, and the matching agent-side
//! loop.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::protocol::{ActionMsg, InitMsg, Message, ResultMsg, StateMsg};
use super::{Agent, AgentError, AgentFactory};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Environment side of a line-protocol session.
pub struct LineAgent {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    child: Option<Child>,
}

impl LineAgent {
    /// Wraps a reader and writer. Reading happens on a helper thread so that
    /// replies can be awaited with a timeout.
    pub fn new(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static, timeout: Duration) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        LineAgent { writer: Box::new(writer), lines: rx, timeout, child: None }
    }

    fn send(&mut self, msg: &Message) -> Result<(), AgentError> {
        let mut line = msg.to_line();
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| AgentError::Io(e.to_string()))
    }

    fn recv(&mut self) -> Result<Message, AgentError> {
        loop {
            match self.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return Message::from_line(&line),
                Ok(Err(e)) => return Err(AgentError::Io(e.to_string())),
                Err(RecvTimeoutError::Timeout) => return Err(AgentError::Timeout(self.timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(AgentError::Protocol("agent closed the connection".into()))
                }
            }
        }
    }
}

impl Agent for LineAgent {
    fn init(&mut self, msg: &InitMsg) -> Result<(), AgentError> {
        self.send(&Message::Init(msg.clone()))
    }

    fn act(&mut self, msg: &StateMsg) -> Result<ActionMsg, AgentError> {
        self.send(&Message::State(msg.clone()))?;
        match self.recv()? {
            Message::Action(a) => Ok(a),
            other => Err(AgentError::Protocol(format!("expected action, got {}", other.kind()))),
        }
    }

    fn result(&mut self, msg: &ResultMsg) -> Result<(), AgentError> {
        self.send(&Message::Result(msg.clone()))
    }

    fn end(&mut self) -> Result<(), AgentError> {
        self.send(&Message::End)
    }
}

impl Drop for LineAgent {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            // Closing stdin lets a well-behaved agent exit on EOF.
            self.writer = Box::new(std::io::sink());
            for _ in 0..50 {
                if matches!(child.try_wait(), Ok(Some(_))) {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Spawns one child process per episode and talks to it over stdin/stdout.
#[derive(Debug, Clone)]
pub struct SubprocessFactory {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl SubprocessFactory {
    /// Splits a command line on whitespace.
    pub fn from_command_line(cmd: &str, timeout: Duration) -> Result<Self, AgentError> {
        let mut parts = cmd.split_whitespace().map(String::from);
        let program = parts.next().ok_or_else(|| AgentError::Spawn("empty agent command".into()))?;
        Ok(SubprocessFactory { program, args: parts.collect(), timeout })
    }

    pub fn spawn(&self) -> Result<LineAgent, AgentError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AgentError::Spawn(format!("{}: {e}", self.program)))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let mut agent = LineAgent::new(stdout, stdin, self.timeout);
        agent.child = Some(child);
        Ok(agent)
    }
}

impl AgentFactory for SubprocessFactory {
    fn create(&self, _repeat: usize, _problem_index: usize) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(self.spawn()?))
    }
}

/// Opens one TCP connection per episode.
#[derive(Debug, Clone)]
pub struct TcpFactory {
    pub addr: String,
    pub timeout: Duration,
}

impl TcpFactory {
    pub fn connect(&self) -> Result<LineAgent, AgentError> {
        let addr = self
            .addr
            .to_socket_addrs()
            .map_err(|e| AgentError::Spawn(format!("{}: {e}", self.addr)))?
            .next()
            .ok_or_else(|| AgentError::Spawn(format!("{} resolves to nothing", self.addr)))?;
        let stream = TcpStream::connect_timeout(&addr, self.timeout)
            .map_err(|e| AgentError::Spawn(format!("{}: {e}", self.addr)))?;
        let _ = stream.set_nodelay(true);
        let reader = stream.try_clone().map_err(|e| AgentError::Io(e.to_string()))?;
        Ok(LineAgent::new(reader, stream, self.timeout))
    }
}

impl AgentFactory for TcpFactory {
    fn create(&self, _repeat: usize, _problem_index: usize) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(self.connect()?))
    }
}

/// Agent side of the protocol. A new agent is made for every `init`; the
/// loop returns on EOF.
pub fn serve<R: BufRead, W: Write>(
    mut make: impl FnMut(&InitMsg) -> Box<dyn Agent>,
    reader: R,
    mut writer: W,
) -> Result<usize, AgentError> {
    let mut agent: Option<Box<dyn Agent>> = None;
    let mut episodes = 0;
    let io = |e: std::io::Error| AgentError::Io(e.to_string());
    for line in reader.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let msg = Message::from_line(&line)?;
        let no_session = || AgentError::Protocol(format!("{} before init", msg.kind()));
        match &msg {
            Message::Init(init) => {
                let mut a = make(init);
                a.init(init)?;
                agent = Some(a);
            }
            Message::State(s) => {
                let action = agent.as_mut().ok_or_else(no_session)?.act(s)?;
                writeln!(writer, "{}", Message::Action(action).to_line()).map_err(io)?;
                writer.flush().map_err(io)?;
            }
            Message::Result(r) => agent.as_mut().ok_or_else(no_session)?.result(r)?,
            Message::End => {
                agent.take().ok_or_else(no_session)?.end()?;
                episodes += 1;
            }
            Message::Action(_) => return Err(AgentError::Protocol("agents do not receive actions".into())),
        }
    }
    Ok(episodes)
}

/// Accepts connections forever, serving each on its own thread.
pub fn serve_tcp<F>(listener: TcpListener, make: F) -> std::io::Result<()>
where
    F: Fn(&InitMsg) -> Box<dyn Agent> + Clone + Send + 'static,
{
    for stream in listener.incoming() {
        let stream = stream?;
        let make = make.clone();
        thread::spawn(move || {
            let Ok(reader) = stream.try_clone() else { return };
            if let Err(e) = serve(make, BufReader::new(reader), stream) {
                eprintln!("agent session ended with error: {e}");
            }
        });
    }
    Ok(())
}
