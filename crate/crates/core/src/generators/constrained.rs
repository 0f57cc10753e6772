//! Constraint-aware generation for the critical event kinds.
//!
//! Each generator reads a fixed number of choices for a given subtype path,
//! consults the live state so that the emitted event is valid, and folds
//! the event into the state.

use std::net::Ipv4Addr;

use indexmap::{IndexMap, IndexSet};
use serde::Serialize;

use crate::event::{
    ArpBody, ConnectPoint, DeviceId, DeviceInfo, EthType, Event, EventKind, HostInfo, LinkInfo,
    LinkKey, MacAddr, PacketInfo, Payload, Subtype, ARP_REPLY, ARP_REQUEST,
};
use crate::testbed::behaviors::{PATH_QUERY_KEY, STATS_QUERY_KEY};

use super::choice::ChoiceStream;

/// Device ids are drawn from `1..=DEVICE_POOL`.
pub const DEVICE_POOL: u64 = 8;
/// Devices expose ports `1..=n` with `n <= MAX_PORTS`.
pub const MAX_PORTS: u32 = 8;
/// Config keys the constrained generator writes.
pub const CONFIG_VOCABULARY: [&str; 4] = [
    PATH_QUERY_KEY,
    STATS_QUERY_KEY,
    "echo/message",
    "counter/label",
];

pub const LLDP_MULTICAST: MacAddr = MacAddr([0x01, 0x80, 0xc2, 0x00, 0x00, 0x0e]);

/// What the generated prefix of a sequence has established so far.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GeneratorState {
    pub live_hosts: IndexMap<String, HostInfo>,
    /// Hosts that were removed and not added again.
    pub retired_hosts: IndexSet<String>,
    pub live_devices: IndexMap<DeviceId, Vec<u32>>,
    pub live_links: IndexSet<LinkKey>,
    /// Sender IP to sender MAC for every ARP packet seen.
    pub arp_known: IndexMap<Ipv4Addr, MacAddr>,
    pub live_config: IndexMap<String, String>,
}

impl GeneratorState {
    pub fn new() -> GeneratorState {
        GeneratorState::default()
    }

    pub fn clear(&mut self) {
        *self = GeneratorState::default();
    }

    pub fn port_in_use(&self, cp: ConnectPoint) -> bool {
        self.live_links.iter().any(|k| k.0 == cp || k.1 == cp)
    }

    fn free_ports(&self, device: DeviceId) -> Vec<u32> {
        self.live_devices
            .get(&device)
            .map(|ports| {
                ports
                    .iter()
                    .copied()
                    .filter(|&port| !self.port_in_use(ConnectPoint { device, port }))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Records the effect of a valid event.
    pub fn apply(&mut self, event: &Event) {
        match (&event.payload, event.subtype) {
            (Payload::Host(h), Subtype::HostAdded | Subtype::HostUpdated) => {
                self.retired_hosts.shift_remove(&h.name);
                self.live_hosts.insert(h.name.clone(), h.clone());
            }
            (Payload::Host(h), Subtype::HostRemoved) => {
                if self.live_hosts.shift_remove(&h.name).is_some() {
                    self.retired_hosts.insert(h.name.clone());
                }
            }
            (Payload::Device(d), Subtype::DeviceAdded) => {
                self.live_devices.insert(d.id, d.ports.clone());
            }
            (Payload::Device(d), Subtype::DeviceRemoved) => {
                self.live_devices.shift_remove(&d.id);
                self.live_links
                    .retain(|k| k.0.device != d.id && k.1.device != d.id);
            }
            (Payload::Link(l), Subtype::LinkAdded) => {
                self.live_links.insert(l.key());
            }
            (Payload::Link(l), Subtype::LinkRemoved) => {
                self.live_links.shift_remove(&l.key());
            }
            (Payload::Packet(p), _) => {
                if let (EthType::Arp, Some(arp)) = (p.eth_type, &p.arp) {
                    self.arp_known.insert(arp.spa, arp.sha);
                }
            }
            (Payload::Config(c), Subtype::ConfigAdded | Subtype::ConfigUpdated) => {
                self.live_config.insert(c.key.clone(), c.value.clone());
            }
            (Payload::Config(c), Subtype::ConfigRemoved) => {
                self.live_config.shift_remove(&c.key);
            }
            _ => {}
        }
    }
}

/// Generates a valid event of `kind`, preferring subtype `want` when given,
/// and folds it into `state`.
///
/// A LINK_EVENT requested while fewer than two devices are live is emitted
/// as a DEVICE_ADDED instead, since no link event could be valid.
pub fn constrained_generate(
    kind: EventKind,
    want: Option<Subtype>,
    stream: &mut ChoiceStream,
    state: &mut GeneratorState,
) -> Event {
    let event = match kind {
        EventKind::HostEvent => host_event(want, stream, state),
        EventKind::DeviceEvent => device_event(want, stream, state),
        EventKind::LinkEvent => link_event(want, stream, state),
        EventKind::PacketIn => packet_in(want, stream, state),
        EventKind::ConfigEvent => config_event(want, stream, state),
    };
    state.apply(&event);
    event
}

/// Relative subtype frequencies. Topology changes are mostly discoveries,
/// so additions outweigh removals; other kinds are uniform.
fn subtype_weights(kind: EventKind) -> &'static [(Subtype, u64)] {
    use Subtype::*;
    match kind {
        EventKind::HostEvent => &[(HostAdded, 1), (HostRemoved, 1), (HostUpdated, 1)],
        EventKind::DeviceEvent => &[(DeviceAdded, 2), (DeviceRemoved, 1), (PortUpdated, 2)],
        EventKind::LinkEvent => &[(LinkAdded, 3), (LinkRemoved, 1)],
        EventKind::PacketIn => &[(PacketArp, 1), (PacketIpv4, 1), (PacketLldp, 1)],
        EventKind::ConfigEvent => &[(ConfigAdded, 1), (ConfigUpdated, 1), (ConfigRemoved, 1)],
    }
}
fn pick_subtype(kind: EventKind, want: Option<Subtype>, stream: &mut ChoiceStream) -> Subtype {
    let weights = subtype_weights(kind);
    let mut roll = stream.next_choice(weights.iter().map(|(_, w)| w).sum());
    let mut chosen = weights[0].0;
    for &(subtype, weight) in weights {
        if roll < weight {
            chosen = subtype;
            break;
        }
        roll -= weight;
    }
    want.filter(|w| w.kind() == kind).unwrap_or(chosen)
}

fn fresh_host(stream: &mut ChoiceStream) -> HostInfo {
    let n = stream.next_choice(1 << 16) as u16;
    let [hi, lo] = n.to_be_bytes();
    HostInfo {
        name: format!("h-{n:04x}"),
        mac: MacAddr::local([10, 1, hi, lo]),
        ip: Ipv4Addr::new(10, 1, hi, lo),
    }
}

fn host_event(want: Option<Subtype>, stream: &mut ChoiceStream, state: &GeneratorState) -> Event {
    let subtype = pick_subtype(EventKind::HostEvent, want, stream);
    if subtype != Subtype::HostAdded && !state.live_hosts.is_empty() {
        let (_, host) = state
            .live_hosts
            .get_index(stream.next_index(state.live_hosts.len()))
            .expect("index in range");
        return Event::host(subtype, host.clone());
    }
    let host = fresh_host(stream);
    if state.live_hosts.contains_key(&host.name) {
        Event::host(Subtype::HostUpdated, host)
    } else {
        Event::host(Subtype::HostAdded, host)
    }
}

fn device_event(want: Option<Subtype>, stream: &mut ChoiceStream, state: &GeneratorState) -> Event {
    let subtype = pick_subtype(EventKind::DeviceEvent, want, stream);
    let full = state.live_devices.len() as u64 >= DEVICE_POOL;
    if subtype == Subtype::DeviceAdded && !full || state.live_devices.is_empty() {
        let start = stream.next_choice(DEVICE_POOL);
        let id = (0..DEVICE_POOL)
            .map(|i| DeviceId(1 + (start + i) % DEVICE_POOL))
            .find(|id| !state.live_devices.contains_key(id))
            .expect("pool has a free id");
        let count = 1 + stream.next_choice(u64::from(MAX_PORTS)) as u32;
        return Event::device(
            Subtype::DeviceAdded,
            DeviceInfo {
                id,
                ports: (1..=count).collect(),
            },
        );
    }
    let (&id, ports) = state
        .live_devices
        .get_index(stream.next_index(state.live_devices.len()))
        .expect("index in range");
    if subtype == Subtype::DeviceRemoved {
        return Event::device(
            Subtype::DeviceRemoved,
            DeviceInfo {
                id,
                ports: ports.clone(),
            },
        );
    }
    let port = ports[stream.next_index(ports.len())];
    Event::device(
        Subtype::PortUpdated,
        DeviceInfo {
            id,
            ports: vec![port],
        },
    )
}

fn link_event(want: Option<Subtype>, stream: &mut ChoiceStream, state: &GeneratorState) -> Event {
    let subtype = pick_subtype(EventKind::LinkEvent, want, stream);
    let open: Vec<(DeviceId, Vec<u32>)> = state
        .live_devices
        .keys()
        .map(|&d| (d, state.free_ports(d)))
        .filter(|(_, free)| !free.is_empty())
        .collect();
    let can_add = open.len() >= 2;
    if (subtype == Subtype::LinkRemoved || !can_add) && !state.live_links.is_empty() {
        let key = *state
            .live_links
            .get_index(stream.next_index(state.live_links.len()))
            .expect("index in range");
        return Event::link(
            Subtype::LinkRemoved,
            LinkInfo {
                src: key.0,
                dst: key.1,
            },
        );
    }
    if !can_add {
        return device_event(Some(Subtype::DeviceAdded), stream, state);
    }
    let a = stream.next_index(open.len());
    let mut b = stream.next_index(open.len() - 1);
    if b >= a {
        b += 1;
    }
    let (da, fa) = &open[a];
    let (db, fb) = &open[b];
    let src = ConnectPoint {
        device: *da,
        port: fa[stream.next_index(fa.len())],
    };
    let dst = ConnectPoint {
        device: *db,
        port: fb[stream.next_index(fb.len())],
    };
    Event::link(Subtype::LinkAdded, LinkInfo { src, dst })
}

/// Packet-ins always read the same four choices: template, ingress port and
/// two 16-bit address selectors, so mutating one packet never shifts the
/// decoding of the packets after it.
fn packet_in(want: Option<Subtype>, stream: &mut ChoiceStream, state: &GeneratorState) -> Event {
    let template = stream.next_choice(8);
    let in_port = 1 + stream.next_choice(u64::from(MAX_PORTS)) as u32;
    let a = stream.next_choice(1 << 16) as u16;
    let b = stream.next_choice(1 << 16) as u16;
    let template = match want {
        Some(Subtype::PacketArp) => template % 6,
        Some(Subtype::PacketIpv4) => 6,
        Some(Subtype::PacketLldp) => 7,
        _ => template,
    };
    let addr = |n: u16| {
        let [hi, lo] = n.to_be_bytes();
        Ipv4Addr::new(10, 0, hi, lo)
    };
    let host_mac = |ip: Ipv4Addr| MacAddr::local(ip.octets());
    let spa = addr(a);
    let sha = host_mac(spa);
    let packet = match template {
        3..=5 if !state.arp_known.is_empty() => {
            let (&tpa, &tha) = state
                .arp_known
                .get_index(usize::from(b) % state.arp_known.len())
                .expect("index in range");
            PacketInfo {
                in_port,
                eth_src: sha,
                eth_dst: tha,
                eth_type: EthType::Arp,
                arp: Some(ArpBody {
                    op: ARP_REPLY,
                    spa,
                    sha,
                    tpa,
                    tha,
                }),
            }
        }
        0..=5 => PacketInfo {
            in_port,
            eth_src: sha,
            eth_dst: MacAddr::BROADCAST,
            eth_type: EthType::Arp,
            arp: Some(ArpBody {
                op: ARP_REQUEST,
                spa,
                sha,
                tpa: addr(b),
                tha: MacAddr::ZERO,
            }),
        },
        6 => PacketInfo {
            in_port,
            eth_src: sha,
            eth_dst: host_mac(addr(b)),
            eth_type: EthType::Ipv4,
            arp: None,
        },
        _ => {
            let [hi, lo] = a.to_be_bytes();
            PacketInfo {
                in_port,
                eth_src: MacAddr::local([0, 0, hi, lo]),
                eth_dst: LLDP_MULTICAST,
                eth_type: EthType::Lldp,
                arp: None,
            }
        }
    };
    Event::packet_in(packet)
}

fn config_event(want: Option<Subtype>, stream: &mut ChoiceStream, state: &GeneratorState) -> Event {
    let pick = stream.next_index(CONFIG_VOCABULARY.len());
    let subtype = pick_subtype(EventKind::ConfigEvent, want, stream);
    let v = stream.next_choice(1 << 16) as u16;
    let devices = state.live_devices.len();
    let key = (0..CONFIG_VOCABULARY.len())
        .map(|i| CONFIG_VOCABULARY[(pick + i) % CONFIG_VOCABULARY.len()])
        .find(|&k| k != PATH_QUERY_KEY || devices >= 2 || state.live_config.contains_key(k))
        .expect("vocabulary has keys without preconditions");
    let live = state.live_config.contains_key(key);
    if live && subtype == Subtype::ConfigRemoved {
        return Event::config(Subtype::ConfigRemoved, key, "");
    }
    let value = if key == PATH_QUERY_KEY {
        if devices < 2 {
            // Only a live query can land here; retire it.
            return Event::config(Subtype::ConfigRemoved, key, "");
        }
        let [hi, lo] = v.to_be_bytes();
        let src = usize::from(hi) % devices;
        let mut dst = usize::from(lo) % (devices - 1);
        if dst >= src {
            dst += 1;
        }
        let ids: Vec<&DeviceId> = state.live_devices.keys().collect();
        format!("{}>{}", ids[src], ids[dst])
    } else if key == STATS_QUERY_KEY {
        "all".to_owned()
    } else {
        format!("v{v:04x}")
    };
    let subtype = if live {
        Subtype::ConfigUpdated
    } else {
        Subtype::ConfigAdded
    };
    Event::config(subtype, key, value)
}
