//! Engagement between hosts: event tuples and the rules linking boards.

use crate::board::BoardRef;
use crate::rule::{library, Rule};
use crate::tuple::{Tuple, Value};

/// Board receiving `<connect, h>` and `<disconnect, h>`.
pub const SYSTEM_BOARD: &str = "sys";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Connect,
    Disconnect,
}

impl Event {
    pub fn tuple(self, host: &str) -> Tuple {
        let verb = match self {
            Event::Connect => "connect",
            Event::Disconnect => "disconnect",
        };
        Tuple::new(vec![Value::Atom(verb.into()), host_value(host)]).expect("two fields")
    }
}

/// Host names that are not atoms (addresses, capitalised names) travel as
/// strings.
fn host_value(host: &str) -> Value {
    if crate::tuple::is_atom(host) {
        Value::Atom(host.into())
    } else {
        Value::Str(host.into())
    }
}

/// `[in(b@peer, ?X)] ->b [in(b, !X)]`, hosted on the local `board`: the
/// local board reads the peer's copy without transferring anything.
pub fn link_rule(board: &str, peer: &str, peer_board: &str) -> Rule {
    library::inherit(&BoardRef::local(board), &BoardRef::remote(peer_board, peer))
}

/// Boards linked on engagement: those public on both sides, by name.
pub fn shared_boards(mine: &[String], theirs: &[String]) -> Vec<String> {
    let mut out: Vec<String> = mine.iter().filter(|b| theirs.contains(b)).cloned().collect();
    out.sort();
    out.dedup();
    out
}
