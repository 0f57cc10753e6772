//! Type-based generation: sample a value of a described type, field by
//! field, with no knowledge of what makes an event meaningful.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::event::{
    ArpBody, ConfigEntry, ConnectPoint, DeviceId, DeviceInfo, EthType, Event, EventKind, HostInfo,
    LinkInfo, MacAddr, PacketInfo, Payload, Subtype,
};

use super::choice::ChoiceStream;
use super::GenerateError;

/// Nesting deeper than this is rejected.
pub const MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TypeDescriptor {
    Int {
        min: i64,
        max: i64,
    },
    String {
        alphabet: String,
        max_len: usize,
    },
    Mac,
    Ip,
    Enum {
        values: Vec<String>,
    },
    Record {
        fields: IndexMap<String, TypeDescriptor>,
    },
    List {
        element: Box<TypeDescriptor>,
        max_len: usize,
    },
    Optional {
        inner: Box<TypeDescriptor>,
    },
}

/// A generated value. Field names and enum members borrow from the
/// descriptor, which keeps decoding cheap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value<'d> {
    Int(i64),
    Str(String),
    Mac(MacAddr),
    Ip(Ipv4Addr),
    Enum(&'d str),
    Record(Vec<(&'d str, Value<'d>)>),
    List(Vec<Value<'d>>),
    Optional(Option<Box<Value<'d>>>),
}

impl<'d> Value<'d> {
    pub fn field(&self, name: &str) -> Option<&Value<'d>> {
        match self {
            Value::Record(fields) => fields.iter().find(|(n, _)| *n == name).map(|(_, v)| v),
            _ => None,
        }
    }
}

/// Samples a value conforming to `desc`.
pub fn type_based_generate<'d>(
    desc: &'d TypeDescriptor,
    stream: &mut ChoiceStream,
) -> Result<Value<'d>, GenerateError> {
    generate_at(desc, stream, 0)
}

fn generate_at<'d>(
    desc: &'d TypeDescriptor,
    stream: &mut ChoiceStream,
    depth: usize,
) -> Result<Value<'d>, GenerateError> {
    if depth > MAX_DEPTH {
        return Err(GenerateError::DepthExceeded(MAX_DEPTH));
    }
    Ok(match desc {
        TypeDescriptor::Int { min, max } => {
            if min > max {
                return Err(GenerateError::Descriptor(format!(
                    "empty int range {min}..={max}"
                )));
            }
            let span = max.abs_diff(*min).saturating_add(1);
            Value::Int(min.wrapping_add_unsigned(stream.next_choice(span)))
        }
        TypeDescriptor::String { alphabet, max_len } => {
            let chars: Vec<char> = alphabet.chars().collect();
            let len = if chars.is_empty() {
                0
            } else {
                stream.next_index(max_len + 1)
            };
            Value::Str(
                (0..len)
                    .map(|_| chars[stream.next_index(chars.len())])
                    .collect(),
            )
        }
        TypeDescriptor::Mac => {
            let mut octets = [0u8; 6];
            for o in &mut octets {
                *o = stream.next_byte();
            }
            Value::Mac(MacAddr(octets))
        }
        TypeDescriptor::Ip => {
            let mut octets = [0u8; 4];
            for o in &mut octets {
                *o = stream.next_byte();
            }
            Value::Ip(Ipv4Addr::from(octets))
        }
        TypeDescriptor::Enum { values } => {
            if values.is_empty() {
                return Err(GenerateError::Descriptor("enum without values".into()));
            }
            Value::Enum(&values[stream.next_index(values.len())])
        }
        TypeDescriptor::Record { fields } => {
            let mut out = Vec::with_capacity(fields.len());
            for (name, field) in fields {
                out.push((name.as_str(), generate_at(field, stream, depth + 1)?));
            }
            Value::Record(out)
        }
        TypeDescriptor::List { element, max_len } => {
            let len = stream.next_index(max_len + 1);
            let mut items = Vec::with_capacity(len);
            for _ in 0..len {
                items.push(generate_at(element, stream, depth + 1)?);
            }
            Value::List(items)
        }
        TypeDescriptor::Optional { inner } => {
            if stream.next_choice(2) == 1 {
                Value::Optional(Some(Box::new(generate_at(inner, stream, depth + 1)?)))
            } else {
                Value::Optional(None)
            }
        }
    })
}

/// Structural check: ranges, lengths, alphabets and field presence.
pub fn conforms(desc: &TypeDescriptor, value: &Value<'_>) -> bool {
    match (desc, value) {
        (TypeDescriptor::Int { min, max }, Value::Int(v)) => min <= v && v <= max,
        (TypeDescriptor::String { alphabet, max_len }, Value::Str(s)) => {
            s.chars().count() <= *max_len && s.chars().all(|c| alphabet.contains(c))
        }
        (TypeDescriptor::Mac, Value::Mac(_)) | (TypeDescriptor::Ip, Value::Ip(_)) => true,
        (TypeDescriptor::Enum { values }, Value::Enum(v)) => values.iter().any(|x| x == v),
        (TypeDescriptor::Record { fields }, Value::Record(got)) => {
            fields.len() == got.len()
                && fields
                    .iter()
                    .zip(got)
                    .all(|((n, d), (m, v))| n == m && conforms(d, v))
        }
        (TypeDescriptor::List { element, max_len }, Value::List(items)) => {
            items.len() <= *max_len && items.iter().all(|v| conforms(element, v))
        }
        (TypeDescriptor::Optional { inner }, Value::Optional(v)) => {
            v.as_ref().is_none_or(|v| conforms(inner, v))
        }
        _ => false,
    }
}

/// Descriptors for each event kind's generic form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeCatalog {
    kinds: BTreeMap<EventKind, TypeDescriptor>,
}

impl TypeCatalog {
    pub fn from_json(text: &str) -> Result<TypeCatalog, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// The descriptors shipped with the testbed.
    pub fn shipped() -> TypeCatalog {
        TypeCatalog::from_json(crate::testbed::fixtures::EVENT_TYPES_JSON)
            .expect("shipped type descriptors are valid")
    }

    pub fn descriptor(&self, kind: EventKind) -> Option<&TypeDescriptor> {
        self.kinds.get(&kind)
    }

    /// Generates an event of `kind` without regard for its meaning.
    pub fn generate_event(
        &self,
        kind: EventKind,
        stream: &mut ChoiceStream,
    ) -> Result<Event, GenerateError> {
        let desc = self
            .descriptor(kind)
            .ok_or(GenerateError::NoDescriptor(kind))?;
        let value = type_based_generate(desc, stream)?;
        value_to_event(kind, &value)
    }
}

fn missing(kind: EventKind, field: &str) -> GenerateError {
    GenerateError::Descriptor(format!("{kind} descriptor lacks a usable {field:?} field"))
}

fn int(kind: EventKind, v: &Value<'_>, field: &str) -> Result<i64, GenerateError> {
    match v.field(field) {
        Some(Value::Int(i)) => Ok(*i),
        _ => Err(missing(kind, field)),
    }
}

fn port(kind: EventKind, v: &Value<'_>, field: &str) -> Result<u32, GenerateError> {
    u32::try_from(int(kind, v, field)?).map_err(|_| missing(kind, field))
}

fn text<'a>(kind: EventKind, v: &'a Value<'_>, field: &str) -> Result<&'a str, GenerateError> {
    match v.field(field) {
        Some(Value::Str(s)) => Ok(s),
        Some(Value::Enum(s)) => Ok(s),
        _ => Err(missing(kind, field)),
    }
}

fn mac(kind: EventKind, v: &Value<'_>, field: &str) -> Result<MacAddr, GenerateError> {
    match v.field(field) {
        Some(Value::Mac(m)) => Ok(*m),
        _ => Err(missing(kind, field)),
    }
}

fn ip(kind: EventKind, v: &Value<'_>, field: &str) -> Result<Ipv4Addr, GenerateError> {
    match v.field(field) {
        Some(Value::Ip(a)) => Ok(*a),
        _ => Err(missing(kind, field)),
    }
}

fn subtype(kind: EventKind, v: &Value<'_>) -> Result<Subtype, GenerateError> {
    Subtype::parse(text(kind, v, "subtype")?)
        .filter(|s| s.kind() == kind)
        .ok_or_else(|| missing(kind, "subtype"))
}

fn device_id(kind: EventKind, v: &Value<'_>, field: &str) -> Result<DeviceId, GenerateError> {
    u64::try_from(int(kind, v, field)?)
        .map(DeviceId)
        .map_err(|_| missing(kind, field))
}

/// Maps a generated record onto the event payload of `kind`.
pub fn value_to_event(kind: EventKind, v: &Value<'_>) -> Result<Event, GenerateError> {
    Ok(match kind {
        EventKind::HostEvent => Event::host(
            subtype(kind, v)?,
            HostInfo {
                name: text(kind, v, "name")?.to_owned(),
                mac: mac(kind, v, "mac")?,
                ip: ip(kind, v, "ip")?,
            },
        ),
        EventKind::DeviceEvent => {
            let ports = match v.field("ports") {
                Some(Value::List(items)) => items
                    .iter()
                    .map(|p| match p {
                        Value::Int(i) => u32::try_from(*i).map_err(|_| missing(kind, "ports")),
                        _ => Err(missing(kind, "ports")),
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                _ => return Err(missing(kind, "ports")),
            };
            Event::device(
                subtype(kind, v)?,
                DeviceInfo {
                    id: device_id(kind, v, "id")?,
                    ports,
                },
            )
        }
        EventKind::LinkEvent => Event::link(
            subtype(kind, v)?,
            LinkInfo {
                src: ConnectPoint {
                    device: device_id(kind, v, "src_device")?,
                    port: port(kind, v, "src_port")?,
                },
                dst: ConnectPoint {
                    device: device_id(kind, v, "dst_device")?,
                    port: port(kind, v, "dst_port")?,
                },
            },
        ),
        EventKind::PacketIn => {
            let eth_type = match text(kind, v, "eth_type")? {
                "arp" => EthType::Arp,
                "ipv4" => EthType::Ipv4,
                "lldp" => EthType::Lldp,
                _ => return Err(missing(kind, "eth_type")),
            };
            let arp = match v.field("arp") {
                Some(Value::Optional(None)) | None => None,
                Some(Value::Optional(Some(body))) => Some(ArpBody {
                    op: u16::try_from(int(kind, body, "op")?).map_err(|_| missing(kind, "op"))?,
                    spa: ip(kind, body, "spa")?,
                    sha: mac(kind, body, "sha")?,
                    tpa: ip(kind, body, "tpa")?,
                    tha: mac(kind, body, "tha")?,
                }),
                _ => return Err(missing(kind, "arp")),
            };
            Event::packet_in(PacketInfo {
                in_port: port(kind, v, "in_port")?,
                eth_src: mac(kind, v, "eth_src")?,
                eth_dst: mac(kind, v, "eth_dst")?,
                eth_type,
                arp,
            })
        }
        EventKind::ConfigEvent => Event::new(
            subtype(kind, v)?,
            Payload::Config(ConfigEntry {
                key: text(kind, v, "key")?.to_owned(),
                value: text(kind, v, "value")?.to_owned(),
            }),
        ),
    })
}
