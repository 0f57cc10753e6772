//! OpenFlow-lite: a JSON rendering of packet-in messages, one object per line.
//!
//! ```json
//! {"type":"packet_in","in_port":3,"eth_src":"02:00:0a:00:00:01",
//!  "eth_dst":"ff:ff:ff:ff:ff:ff","eth_type":"arp",
//!  "arp":{"op":1,"spa":"10.0.0.1","sha":"02:00:0a:00:00:01","tpa":"10.0.0.2","tha":"00:00:00:00:00:00"}}
//! ```

use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::event::{ArpBody, EthType, Event, MacAddr, PacketInfo, Payload, ARP_REPLY, ARP_REQUEST};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct MessageError {
    pub field: String,
    pub message: String,
}

impl MessageError {
    fn new(field: &str, message: impl Into<String>) -> MessageError {
        MessageError {
            field: field.to_owned(),
            message: message.into(),
        }
    }
}

/// Wire form of a packet-in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PacketInMessage {
    #[serde(rename = "type")]
    pub msg_type: &'static str,
    #[serde(flatten)]
    pub packet: PacketInfo,
}

impl PacketInMessage {
    pub fn from_event(event: &Event) -> Option<PacketInMessage> {
        match &event.payload {
            Payload::Packet(packet) => Some(PacketInMessage {
                msg_type: "packet_in",
                packet: *packet,
            }),
            _ => None,
        }
    }
}

/// Parses one OpenFlow-lite message into a PACKET_IN event.
pub fn ingest_message(line: &str) -> Result<Event, MessageError> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| MessageError::new("message", format!("not valid JSON: {e}")))?;
    let Value::Object(msg) = value else {
        return Err(MessageError::new("message", "expected a JSON object"));
    };
    match msg.get("type") {
        Some(Value::String(t)) if t == "packet_in" => {}
        Some(Value::String(t)) => {
            return Err(MessageError::new(
                "type",
                format!("unsupported message type {t:?}"),
            ))
        }
        _ => return Err(MessageError::new("type", "missing message type")),
    }
    let in_port = u32_field(&msg, "in_port")?;
    let eth_src = parsed_field::<MacAddr>(&msg, "eth_src", "eth_src")?;
    let eth_dst = parsed_field::<MacAddr>(&msg, "eth_dst", "eth_dst")?;
    let eth_type = match str_field(&msg, "eth_type", "eth_type")? {
        "arp" => EthType::Arp,
        "ipv4" => EthType::Ipv4,
        "lldp" => EthType::Lldp,
        other => {
            return Err(MessageError::new(
                "eth_type",
                format!("unknown ethernet type {other:?}"),
            ))
        }
    };
    let arp = match (eth_type, msg.get("arp")) {
        (EthType::Arp, Some(Value::Object(body))) => Some(parse_arp(body)?),
        (EthType::Arp, Some(_)) => return Err(MessageError::new("arp", "expected an object")),
        (EthType::Arp, None) => {
            return Err(MessageError::new(
                "arp",
                "ARP frames must carry an ARP body",
            ))
        }
        (_, None | Some(Value::Null)) => None,
        (_, Some(_)) => {
            return Err(MessageError::new(
                "arp",
                "an ARP body is only allowed when eth_type is arp",
            ))
        }
    };
    Ok(Event::packet_in(PacketInfo {
        in_port,
        eth_src,
        eth_dst,
        eth_type,
        arp,
    }))
}

fn parse_arp(body: &Map<String, Value>) -> Result<ArpBody, MessageError> {
    let op = match body.get("op").and_then(Value::as_u64) {
        Some(op) if op == u64::from(ARP_REQUEST) || op == u64::from(ARP_REPLY) => op as u16,
        Some(op) => {
            return Err(MessageError::new(
                "arp.op",
                format!("must be 1 or 2, got {op}"),
            ))
        }
        None => return Err(MessageError::new("arp.op", "missing or not an integer")),
    };
    Ok(ArpBody {
        op,
        spa: parsed_field::<Ipv4Addr>(body, "spa", "arp.spa")?,
        sha: parsed_field::<MacAddr>(body, "sha", "arp.sha")?,
        tpa: parsed_field::<Ipv4Addr>(body, "tpa", "arp.tpa")?,
        tha: parsed_field::<MacAddr>(body, "tha", "arp.tha")?,
    })
}

fn u32_field(msg: &Map<String, Value>, field: &str) -> Result<u32, MessageError> {
    msg.get(field)
        .and_then(Value::as_u64)
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| MessageError::new(field, "expected a non-negative 32-bit integer"))
}

fn str_field<'a>(
    msg: &'a Map<String, Value>,
    field: &str,
    label: &str,
) -> Result<&'a str, MessageError> {
    msg.get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| MessageError::new(label, "missing or not a string"))
}

fn parsed_field<T: FromStr>(
    msg: &Map<String, Value>,
    field: &str,
    label: &str,
) -> Result<T, MessageError> {
    let text = str_field(msg, field, label)?;
    text.parse()
        .map_err(|_| MessageError::new(label, format!("cannot parse {text:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Subtype;

    const ARP_REQ: &str = r#"{"type":"packet_in","in_port":3,"eth_src":"02:00:0a:00:00:01","eth_dst":"ff:ff:ff:ff:ff:ff","eth_type":"arp","arp":{"op":1,"spa":"10.0.0.1","sha":"02:00:0a:00:00:01","tpa":"10.0.0.2","tha":"00:00:00:00:00:00"}}"#;

    #[test]
    fn arp_request_becomes_packet_in() {
        let event = ingest_message(ARP_REQ).unwrap();
        assert_eq!(event.subtype, Subtype::PacketArp);
        let Payload::Packet(p) = event.payload else {
            panic!("not a packet")
        };
        let arp = p.arp.unwrap();
        assert_eq!(arp.op, ARP_REQUEST);
        assert_eq!(arp.spa, Ipv4Addr::new(10, 0, 0, 1));
        assert_eq!(p.in_port, 3);
    }

    #[test]
    fn ipv4_without_body() {
        let line = r#"{"type":"packet_in","in_port":1,"eth_src":"02:00:0a:00:00:01","eth_dst":"02:00:0a:00:00:02","eth_type":"ipv4"}"#;
        let event = ingest_message(line).unwrap();
        assert_eq!(event.subtype, Subtype::PacketIpv4);
        assert!(matches!(
            event.payload,
            Payload::Packet(PacketInfo { arp: None, .. })
        ));
    }

    #[test]
    fn errors_name_the_field() {
        let bad_op = ARP_REQ.replace(r#""op":1"#, r#""op":7"#);
        assert_eq!(ingest_message(&bad_op).unwrap_err().field, "arp.op");
        let bad_mac = ARP_REQ.replace("02:00:0a:00:00:01\",\"eth_dst", "zz\",\"eth_dst");
        assert_eq!(ingest_message(&bad_mac).unwrap_err().field, "eth_src");
        let body_on_ipv4 = ARP_REQ.replace(r#""eth_type":"arp""#, r#""eth_type":"ipv4""#);
        assert_eq!(ingest_message(&body_on_ipv4).unwrap_err().field, "arp");
        let wrong_type = ARP_REQ.replace("packet_in", "flow_mod");
        assert_eq!(ingest_message(&wrong_type).unwrap_err().field, "type");
        assert_eq!(ingest_message("[1]").unwrap_err().field, "message");
    }

    #[test]
    fn round_trips_through_wire_form() {
        let event = ingest_message(ARP_REQ).unwrap();
        let wire = serde_json::to_string(&PacketInMessage::from_event(&event).unwrap()).unwrap();
        assert_eq!(ingest_message(&wire).unwrap(), event);
    }
}
