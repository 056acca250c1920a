//! Frames and request/reply lines. See `docs/protocol.md` for the byte
//! layout.

use std::fmt;
use std::io::{self, Read, Write};

use bach_core::syntax::parse_board_ref;
use bach_core::BoardRef;

/// Largest accepted frame body.
pub const MAX_FRAME: usize = 16 << 20;

pub fn write_frame(w: &mut impl Write, text: &str) -> io::Result<()> {
    let len = u32::try_from(text.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too long"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(text.as_bytes())?;
    w.flush()
}

/// Reads one frame body. `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds the limit")));
    }
    let mut body = vec![0; len];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Tell,
    Ask,
    Get,
    Nask,
    TellR,
    AskR,
    GetR,
    NaskR,
    AskCount,
    Read,
    ListBoards,
    Hello,
    Bye,
}

impl Verb {
    const ALL: [Verb; 13] = [
        Verb::Tell,
        Verb::Ask,
        Verb::Get,
        Verb::Nask,
        Verb::TellR,
        Verb::AskR,
        Verb::GetR,
        Verb::NaskR,
        Verb::AskCount,
        Verb::Read,
        Verb::ListBoards,
        Verb::Hello,
        Verb::Bye,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Tell => "TELL",
            Verb::Ask => "ASK",
            Verb::Get => "GET",
            Verb::Nask => "NASK",
            Verb::TellR => "TELLR",
            Verb::AskR => "ASKR",
            Verb::GetR => "GETR",
            Verb::NaskR => "NASKR",
            Verb::AskCount => "ASK-COUNT",
            Verb::Read => "READ",
            Verb::ListBoards => "LIST-BOARDS",
            Verb::Hello => "HELLO",
            Verb::Bye => "BYE",
        }
    }

    pub fn parse(s: &str) -> Option<Verb> {
        Verb::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Verbs addressed to a board.
    pub fn needs_board(self) -> bool {
        !matches!(self, Verb::ListBoards | Verb::Hello | Verb::Bye)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub verb: Verb,
    pub board: Option<BoardRef>,
    /// Milliseconds the server may hold a blocking request.
    pub wait: Option<u64>,
    pub payload: String,
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.id, self.verb.name())?;
        match &self.board {
            Some(b) => write!(f, "{b} ")?,
            None => f.write_str("- ")?,
        }
        match self.wait {
            Some(w) => write!(f, "{w}")?,
            None => f.write_str("-")?,
        }
        if !self.payload.is_empty() {
            write!(f, " {}", self.payload)?;
        }
        Ok(())
    }
}

/// Why a request line could not be decoded. `id` is the request id when it
/// could be read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadRequest {
    pub id: Option<u64>,
    pub kind: &'static str,
    pub message: String,
}

fn split_word(s: &str) -> (&str, &str) {
    match s.find(' ') {
        Some(i) => (&s[..i], &s[i + 1..]),
        None => (s, ""),
    }
}

impl Request {
    pub fn parse(line: &str) -> Result<Request, BadRequest> {
        let bad = |id, kind, message: String| BadRequest { id, kind, message };
        let (id, rest) = split_word(line);
        let id: u64 = id.parse().map_err(|_| bad(None, "ProtocolError", format!("bad request id `{id}`")))?;
        let (verb, rest) = split_word(rest);
        let verb = Verb::parse(verb).ok_or_else(|| bad(Some(id), "UnknownVerb", format!("unknown verb `{verb}`")))?;
        let (board, rest) = split_word(rest);
        let board = match board {
            "-" if !verb.needs_board() => None,
            "-" | "" => return Err(bad(Some(id), "ProtocolError", format!("{} needs a board", verb.name()))),
            b => Some(parse_board_ref(b).map_err(|e| bad(Some(id), "ProtocolError", format!("board: {e}")))?),
        };
        let (wait, payload) = split_word(rest);
        let wait = match wait {
            "-" => None,
            w => Some(w.parse().map_err(|_| bad(Some(id), "ProtocolError", format!("bad wait `{w}`")))?),
        };
        Ok(Request { id, verb, board, wait, payload: payload.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Ok(String),
    Err { kind: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    /// `None` answers a request whose id could not be read.
    pub id: Option<u64>,
    pub body: Body,
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id {
            Some(id) => write!(f, "{id} ")?,
            None => f.write_str("- ")?,
        }
        match &self.body {
            Body::Ok(p) if p.is_empty() => f.write_str("OK"),
            Body::Ok(p) => write!(f, "OK {p}"),
            Body::Err { kind, message } => write!(f, "ERR {kind} {message}"),
        }
    }
}

impl Response {
    pub fn parse(line: &str) -> Option<Response> {
        let (id, rest) = split_word(line);
        let id = if id == "-" { None } else { Some(id.parse().ok()?) };
        let (status, rest) = split_word(rest);
        let body = match status {
            "OK" => Body::Ok(rest.to_string()),
            "ERR" => {
                let (kind, message) = split_word(rest);
                Body::Err { kind: kind.to_string(), message: message.to_string() }
            }
            _ => return None,
        };
        Some(Response { id, body })
    }
}

/// `key=value` fields of HELLO payloads; list values are comma-separated.
pub fn fields(payload: &str) -> impl Iterator<Item = (&str, &str)> {
    payload.split(' ').filter_map(|kv| kv.split_once('='))
}

pub fn list(value: &str) -> Vec<String> {
    value.split(',').filter(|s| !s.is_empty()).map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_lines_round_trip() {
        for line in ["7 TELL jobs - <job, 1>", "8 ASK b@n2 250 <x, ?Y>", "9 LIST-BOARDS - -", "10 HELLO - - name=a boards=b1,b2"] {
            let r = Request::parse(line).unwrap();
            assert_eq!(r.to_string(), line);
        }
    }

    #[test]
    fn bad_requests_keep_the_id_when_possible() {
        assert_eq!(Request::parse("x TELL b - <a>").unwrap_err().id, None);
        let e = Request::parse("4 SHOUT b - <a>").unwrap_err();
        assert_eq!((e.id, e.kind), (Some(4), "UnknownVerb"));
        assert_eq!(Request::parse("5 TELL - - <a>").unwrap_err().kind, "ProtocolError");
        assert_eq!(Request::parse("6 ASK b soon <a>").unwrap_err().kind, "ProtocolError");
    }

    #[test]
    fn responses_round_trip() {
        for line in ["3 OK", "3 OK {X=1}", "- ERR ProtocolError bad request id", "4 ERR Timeout no reply after 100 ms"] {
            assert_eq!(Response::parse(line).unwrap().to_string(), line);
        }
    }

    #[test]
    fn frames_are_length_prefixed() {
        let mut buf = Vec::new();
        write_frame(&mut buf, "1 OK").unwrap();
        assert_eq!(buf, [0, 0, 0, 4, b'1', b' ', b'O', b'K']);
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"1 OK");
        assert!(read_frame(&mut r).unwrap().is_none());
        let huge = ((MAX_FRAME + 1) as u32).to_be_bytes();
        assert!(read_frame(&mut &huge[..]).is_err());
    }
}
