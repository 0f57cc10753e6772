//! Intra- and inter-event validity.

use serde::{Deserialize, Serialize};

use crate::event::{DeviceId, EthType, Event, Payload, Subtype, ARP_REPLY, ARP_REQUEST};
use crate::testbed::behaviors::PATH_QUERY_KEY;

use super::constrained::GeneratorState;

/// A violated constraint, located in its sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub message: String,
}

/// Checks `event` against the state built from the events before it and
/// reports the first violated constraint.
pub fn validate_event(event: &Event, state: &GeneratorState) -> Result<(), String> {
    if event.subtype.kind() != event.kind {
        return Err(format!(
            "subtype {} does not belong to {}",
            event.subtype, event.kind
        ));
    }
    if event.payload.kind() != event.kind {
        return Err(format!("payload does not match kind {}", event.kind));
    }
    match &event.payload {
        Payload::Host(h) => {
            if h.name.is_empty() {
                return Err("name must be non-null/non-empty".into());
            }
            let live = state.live_hosts.contains_key(&h.name);
            match event.subtype {
                Subtype::HostAdded if live => return Err(format!("host {} already added", h.name)),
                Subtype::HostAdded => {
                    if !h.mac.is_unicast() {
                        return Err("host MAC must be unicast".into());
                    }
                    if h.ip.is_unspecified() || h.ip.is_broadcast() {
                        return Err("host IP must be assignable".into());
                    }
                }
                Subtype::HostRemoved | Subtype::HostUpdated if !live => {
                    return Err(if state.retired_hosts.contains(&h.name) {
                        format!("host {} already removed", h.name)
                    } else {
                        format!("host {} never added", h.name)
                    });
                }
                Subtype::HostUpdated if !h.mac.is_unicast() => {
                    return Err("host MAC must be unicast".into())
                }
                _ => {}
            }
        }
        Payload::Device(d) => {
            let live = state.live_devices.get(&d.id);
            match event.subtype {
                Subtype::DeviceAdded => {
                    if live.is_some() {
                        return Err(format!("device {} already added", d.id));
                    }
                    if d.ports.is_empty() {
                        return Err("device must expose at least one port".into());
                    }
                    if d.ports.contains(&0) {
                        return Err("port numbers start at 1".into());
                    }
                    let mut sorted = d.ports.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if sorted.len() != d.ports.len() {
                        return Err("device ports must be distinct".into());
                    }
                }
                Subtype::DeviceRemoved if live.is_none() => {
                    return Err(format!("device {} not present", d.id))
                }
                Subtype::PortUpdated => {
                    let Some(ports) = live else {
                        return Err(format!("device {} not present", d.id));
                    };
                    if d.ports.is_empty() {
                        return Err("port update names no port".into());
                    }
                    if let Some(p) = d.ports.iter().find(|p| !ports.contains(p)) {
                        return Err(format!("device {} has no port {p}", d.id));
                    }
                }
                _ => {}
            }
        }
        Payload::Link(l) => {
            let key = l.key();
            match event.subtype {
                Subtype::LinkAdded => {
                    if l.src.device == l.dst.device {
                        return Err("link must join two different devices".into());
                    }
                    for cp in [l.src, l.dst] {
                        let Some(ports) = state.live_devices.get(&cp.device) else {
                            return Err(format!("link endpoint device {} not present", cp.device));
                        };
                        if !ports.contains(&cp.port) {
                            return Err(format!("device {} has no port {}", cp.device, cp.port));
                        }
                        if state.port_in_use(cp) {
                            return Err(format!("port {}/{} already linked", cp.device, cp.port));
                        }
                    }
                }
                Subtype::LinkRemoved if !state.live_links.contains(&key) => {
                    return Err(format!("link {key} not present"));
                }
                _ => {}
            }
        }
        Payload::Packet(p) => {
            if Subtype::for_eth_type(p.eth_type) != event.subtype {
                return Err(format!(
                    "subtype {} disagrees with eth_type {}",
                    event.subtype,
                    p.eth_type.as_str()
                ));
            }
            if p.in_port == 0 {
                return Err("in_port must be positive".into());
            }
            if !p.eth_src.is_unicast() {
                return Err("eth_src must be unicast".into());
            }
            match (p.eth_type, &p.arp) {
                (EthType::Arp, None) => return Err("ARP frame without ARP body".into()),
                (EthType::Arp, Some(arp)) => {
                    if arp.op != ARP_REQUEST && arp.op != ARP_REPLY {
                        return Err(format!("op must be 1 or 2, got {}", arp.op));
                    }
                    if arp.sha != p.eth_src {
                        return Err("ARP sender MAC differs from eth_src".into());
                    }
                    if arp.spa.is_unspecified() || arp.spa.is_broadcast() {
                        return Err("ARP sender IP must be assignable".into());
                    }
                    if let Some(bound) = state.arp_known.get(&arp.spa) {
                        if *bound != arp.sha {
                            return Err(format!("{} is already bound to {bound}", arp.spa));
                        }
                    }
                    if arp.op == ARP_REPLY {
                        match state.arp_known.get(&arp.tpa) {
                            None => {
                                return Err(format!("ARP reply to unknown requester {}", arp.tpa))
                            }
                            Some(mac) if *mac != arp.tha || p.eth_dst != arp.tha => {
                                return Err("ARP reply not addressed to the requester".into())
                            }
                            _ => {}
                        }
                    }
                }
                (_, Some(_)) => {
                    return Err("ARP body only allowed when eth_type is arp".into());
                }
                (_, None) => {}
            }
        }
        Payload::Config(c) => {
            let live = state.live_config.contains_key(&c.key);
            match event.subtype {
                Subtype::ConfigAdded if live => {
                    return Err(format!("config key {} already present", c.key))
                }
                Subtype::ConfigUpdated | Subtype::ConfigRemoved if !live => {
                    return Err(format!("config key {} not present", c.key))
                }
                _ => {}
            }
            if c.key == PATH_QUERY_KEY && event.subtype != Subtype::ConfigRemoved {
                let Some((src, dst)) = c.value.split_once('>') else {
                    return Err("path query must read SRC>DST".into());
                };
                let (Ok(src), Ok(dst)) = (src.parse::<DeviceId>(), dst.parse::<DeviceId>()) else {
                    return Err("path query names malformed device ids".into());
                };
                if src == dst {
                    return Err("path query endpoints must differ".into());
                }
                if !state.live_devices.contains_key(&src) || !state.live_devices.contains_key(&dst)
                {
                    return Err("path query names a device that is not present".into());
                }
            }
        }
    }
    Ok(())
}

/// Validates a whole sequence, folding only valid events into the state.
pub fn validate_sequence(events: &[Event]) -> Vec<Violation> {
    let mut state = GeneratorState::new();
    let mut violations = Vec::new();
    for (index, event) in events.iter().enumerate() {
        match validate_event(event, &state) {
            Ok(()) => state.apply(event),
            Err(message) => violations.push(Violation { index, message }),
        }
    }
    violations
}
