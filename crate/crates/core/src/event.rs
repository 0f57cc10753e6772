//! Network events carried through the controller's dispatcher.
//!
//! An [`Event`] is the unit of fuzzer input: sequences of events drive the
//! testbed's services into a state, and the last event of a sequence is the
//! one whose handling cost is measured.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    HostEvent,
    DeviceEvent,
    LinkEvent,
    PacketIn,
    ConfigEvent,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::HostEvent,
        EventKind::DeviceEvent,
        EventKind::LinkEvent,
        EventKind::PacketIn,
        EventKind::ConfigEvent,
    ];

    /// Subtypes that are legal under this kind, in declaration order.
    pub fn subtypes(self) -> &'static [Subtype] {
        use Subtype::*;
        match self {
            EventKind::HostEvent => &[HostAdded, HostRemoved, HostUpdated],
            EventKind::DeviceEvent => &[DeviceAdded, DeviceRemoved, PortUpdated],
            EventKind::LinkEvent => &[LinkAdded, LinkRemoved],
            EventKind::PacketIn => &[PacketArp, PacketIpv4, PacketLldp],
            EventKind::ConfigEvent => &[ConfigAdded, ConfigUpdated, ConfigRemoved],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::HostEvent => "HOST_EVENT",
            EventKind::DeviceEvent => "DEVICE_EVENT",
            EventKind::LinkEvent => "LINK_EVENT",
            EventKind::PacketIn => "PACKET_IN",
            EventKind::ConfigEvent => "CONFIG_EVENT",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Subtype {
    HostAdded,
    HostRemoved,
    HostUpdated,
    DeviceAdded,
    DeviceRemoved,
    PortUpdated,
    LinkAdded,
    LinkRemoved,
    PacketArp,
    PacketIpv4,
    PacketLldp,
    ConfigAdded,
    ConfigUpdated,
    ConfigRemoved,
}

impl Subtype {
    pub fn kind(self) -> EventKind {
        use Subtype::*;
        match self {
            HostAdded | HostRemoved | HostUpdated => EventKind::HostEvent,
            DeviceAdded | DeviceRemoved | PortUpdated => EventKind::DeviceEvent,
            LinkAdded | LinkRemoved => EventKind::LinkEvent,
            PacketArp | PacketIpv4 | PacketLldp => EventKind::PacketIn,
            ConfigAdded | ConfigUpdated | ConfigRemoved => EventKind::ConfigEvent,
        }
    }

    pub fn as_str(self) -> &'static str {
        use Subtype::*;
        match self {
            HostAdded => "HOST_ADDED",
            HostRemoved => "HOST_REMOVED",
            HostUpdated => "HOST_UPDATED",
            DeviceAdded => "DEVICE_ADDED",
            DeviceRemoved => "DEVICE_REMOVED",
            PortUpdated => "PORT_UPDATED",
            LinkAdded => "LINK_ADDED",
            LinkRemoved => "LINK_REMOVED",
            PacketArp => "PACKET_ARP",
            PacketIpv4 => "PACKET_IPV4",
            PacketLldp => "PACKET_LLDP",
            ConfigAdded => "CONFIG_ADDED",
            ConfigUpdated => "CONFIG_UPDATED",
            ConfigRemoved => "CONFIG_REMOVED",
        }
    }

    pub fn parse(s: &str) -> Option<Subtype> {
        EventKind::ALL
            .iter()
            .flat_map(|k| k.subtypes().iter().copied())
            .find(|st| st.as_str() == s)
    }

    /// The packet-in subtype that corresponds to an ethernet type.
    pub fn for_eth_type(eth: EthType) -> Subtype {
        match eth {
            EthType::Arp => Subtype::PacketArp,
            EthType::Ipv4 => Subtype::PacketIpv4,
            EthType::Lldp => Subtype::PacketLldp,
        }
    }
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A 48-bit ethernet address, written `aa:bb:cc:dd:ee:ff`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const ZERO: MacAddr = MacAddr([0; 6]);
    pub const BROADCAST: MacAddr = MacAddr([0xff; 6]);

    /// Locally administered unicast address `02:00:a:b:c:d` built from four octets.
    pub fn local(octets: [u8; 4]) -> MacAddr {
        MacAddr([0x02, 0x00, octets[0], octets[1], octets[2], octets[3]])
    }

    pub fn is_unicast(&self) -> bool {
        self.0[0] & 0x01 == 0 && *self != MacAddr::ZERO
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

impl FromStr for MacAddr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for slot in out.iter_mut() {
            let part = parts
                .next()
                .ok_or_else(|| format!("invalid MAC address {s:?}"))?;
            if part.len() != 2 {
                return Err(format!("invalid MAC address {s:?}"));
            }
            *slot =
                u8::from_str_radix(part, 16).map_err(|_| format!("invalid MAC address {s:?}"))?;
        }
        if parts.next().is_some() {
            return Err(format!("invalid MAC address {s:?}"));
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// OpenFlow datapath id, written `of:0000000000000001`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId(pub u64);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "of:{:016x}", self.0)
    }
}

impl FromStr for DeviceId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix("of:")
            .ok_or_else(|| format!("device id {s:?} must start with \"of:\""))?;
        if hex.is_empty() || hex.len() > 16 {
            return Err(format!("invalid device id {s:?}"));
        }
        u64::from_str_radix(hex, 16)
            .map(DeviceId)
            .map_err(|_| format!("invalid device id {s:?}"))
    }
}

impl Serialize for DeviceId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DeviceId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConnectPoint {
    pub device: DeviceId,
    pub port: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HostInfo {
    /// Host identifier; the controller refuses empty names.
    pub name: String,
    pub mac: MacAddr,
    pub ip: Ipv4Addr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeviceInfo {
    pub id: DeviceId,
    pub ports: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkInfo {
    pub src: ConnectPoint,
    pub dst: ConnectPoint,
}

impl LinkInfo {
    /// Direction-independent identity of the link.
    pub fn key(&self) -> LinkKey {
        if self.src <= self.dst {
            LinkKey(self.src, self.dst)
        } else {
            LinkKey(self.dst, self.src)
        }
    }
}

/// Links are undirected: `a -> b` and `b -> a` name the same link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkKey(pub ConnectPoint, pub ConnectPoint);

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}-{}/{}",
            self.0.device, self.0.port, self.1.device, self.1.port
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EthType {
    Arp,
    Ipv4,
    Lldp,
}

impl EthType {
    pub const ALL: [EthType; 3] = [EthType::Arp, EthType::Ipv4, EthType::Lldp];

    pub fn as_str(self) -> &'static str {
        match self {
            EthType::Arp => "arp",
            EthType::Ipv4 => "ipv4",
            EthType::Lldp => "lldp",
        }
    }
}

pub const ARP_REQUEST: u16 = 1;
pub const ARP_REPLY: u16 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArpBody {
    pub op: u16,
    pub spa: Ipv4Addr,
    pub sha: MacAddr,
    pub tpa: Ipv4Addr,
    pub tha: MacAddr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketInfo {
    pub in_port: u32,
    pub eth_src: MacAddr,
    pub eth_dst: MacAddr,
    pub eth_type: EthType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arp: Option<ArpBody>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Host(HostInfo),
    Device(DeviceInfo),
    Link(LinkInfo),
    Packet(PacketInfo),
    Config(ConfigEntry),
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::Host(_) => EventKind::HostEvent,
            Payload::Device(_) => EventKind::DeviceEvent,
            Payload::Link(_) => EventKind::LinkEvent,
            Payload::Packet(_) => EventKind::PacketIn,
            Payload::Config(_) => EventKind::ConfigEvent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub subtype: Subtype,
    pub payload: Payload,
}

impl Event {
    /// Builds an event whose kind is taken from the subtype.
    ///
    /// The payload is not checked against the subtype; generic generation
    /// is allowed to produce mismatches, which [`crate::generators::validate_event`]
    /// reports.
    pub fn new(subtype: Subtype, payload: Payload) -> Event {
        Event {
            kind: subtype.kind(),
            subtype,
            payload,
        }
    }

    pub fn host(subtype: Subtype, host: HostInfo) -> Event {
        Event::new(subtype, Payload::Host(host))
    }

    pub fn device(subtype: Subtype, device: DeviceInfo) -> Event {
        Event::new(subtype, Payload::Device(device))
    }

    pub fn link(subtype: Subtype, link: LinkInfo) -> Event {
        Event::new(subtype, Payload::Link(link))
    }

    /// A packet-in; the subtype follows the ethernet type.
    pub fn packet_in(packet: PacketInfo) -> Event {
        Event::new(
            Subtype::for_eth_type(packet.eth_type),
            Payload::Packet(packet),
        )
    }

    pub fn config(subtype: Subtype, key: impl Into<String>, value: impl Into<String>) -> Event {
        Event::new(
            subtype,
            Payload::Config(ConfigEntry {
                key: key.into(),
                value: value.into(),
            }),
        )
    }

    /// Kind, subtype and payload agree with each other.
    pub fn is_well_typed(&self) -> bool {
        self.subtype.kind() == self.kind && self.payload.kind() == self.kind
    }
}

/// A handler subscription: an event kind, optionally narrowed to one subtype.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventFilter {
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<Subtype>,
}

impl EventFilter {
    pub fn kind(kind: EventKind) -> EventFilter {
        EventFilter {
            kind,
            subtype: None,
        }
    }

    pub fn subtype(subtype: Subtype) -> EventFilter {
        EventFilter {
            kind: subtype.kind(),
            subtype: Some(subtype),
        }
    }

    pub fn matches(&self, event: &Event) -> bool {
        self.kind == event.kind && self.subtype.is_none_or(|st| st == event.subtype)
    }
}

impl fmt::Display for EventFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subtype {
            Some(st) => write!(f, "{}({})", self.kind, st),
            None => write!(f, "{}", self.kind),
        }
    }
}
