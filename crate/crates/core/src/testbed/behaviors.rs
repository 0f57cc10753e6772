//! Handler logic for the testbed services.
//!
//! Every behavior probes its branch points through [`HandlerCx::probes`] and
//! touches state only through [`HandlerCx::state`], so undeclared access is
//! caught by the store.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::event::{EthType, Event, Payload, Subtype, ARP_REPLY, ARP_REQUEST};

use super::controller::{HandlerCx, HandlerError};

pub const ARP_ADDRESS_MAP: &str = "arp.addressMap";
pub const HOST_STORE: &str = "host.store";
pub const DEVICE_STORE: &str = "device.store";
pub const TOPOLOGY_LINKS: &str = "topology.links";
pub const PORT_STATS: &str = "port.stats";
pub const FLOW_TABLE: &str = "flow.table";
pub const ECHO_LOG: &str = "echo.last";
pub const COUNTER: &str = "counter.value";

/// Config key whose value `SRC>DST` asks for all simple paths between two devices.
pub const PATH_QUERY_KEY: &str = "topology/path-query";
/// Config key that asks for a scan over every recorded port sample.
pub const STATS_QUERY_KEY: &str = "stats/query";
/// Config key consumed by the relay behavior; the value is a hop count.
pub const RELAY_KEY: &str = "relay/hops";

/// Stages in the forwarding pipeline, each probed once per IPv4 packet.
pub const FORWARDING_PIPELINE_COST: u64 = 501;
/// Fixed work done by the echo service per config event.
pub const ECHO_COST: u64 = 8;
/// Path enumeration stops after this many extensions.
pub const PATH_EXTENSION_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    /// Learns IP to MAC bindings from ARP packet-ins; lookups scan a copy of
    /// the whole map.
    ArpCache,
    HostTracker,
    /// Tracks devices and announces each port of a new device as a derived
    /// port update.
    DeviceManager,
    /// Maintains links and answers path queries by enumerating every simple path.
    TopologyPath,
    /// Appends a sample per port update; a stats query scans all samples.
    PortStats,
    /// Constant-cost IPv4 pipeline.
    Forwarding,
    BenignEcho,
    BenignCounter,
    /// Re-posts a relay config event with one hop fewer until the count hits zero.
    Relay,
    /// Touches each declared object once.
    Generic,
}

impl Behavior {
    pub fn handle(self, event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
        match self {
            Behavior::ArpCache => arp_cache(event, cx),
            Behavior::HostTracker => host_tracker(event, cx),
            Behavior::DeviceManager => device_manager(event, cx),
            Behavior::TopologyPath => topology_path(event, cx),
            Behavior::PortStats => port_stats(event, cx),
            Behavior::Forwarding => forwarding(event, cx),
            Behavior::BenignEcho => benign_echo(event, cx),
            Behavior::BenignCounter => benign_counter(event, cx),
            Behavior::Relay => relay(event, cx),
            Behavior::Generic => generic(event, cx),
        }
    }
}

fn wrong_payload(service: &str, event: &Event) -> HandlerError {
    HandlerError::domain(format!(
        "{service} cannot handle a {} payload for {}",
        payload_name(&event.payload),
        event.subtype
    ))
}

fn payload_name(p: &Payload) -> &'static str {
    match p {
        Payload::Host(_) => "host",
        Payload::Device(_) => "device",
        Payload::Link(_) => "link",
        Payload::Packet(_) => "packet",
        Payload::Config(_) => "config",
    }
}

fn arp_cache(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("arp.handle");
    let Payload::Packet(packet) = &event.payload else {
        return Err(wrong_payload("arp-cache", event));
    };
    let arp = match (&packet.eth_type, &packet.arp) {
        (EthType::Arp, Some(arp)) if arp.op == ARP_REQUEST || arp.op == ARP_REPLY => arp,
        _ => {
            cx.probes.hit("arp.skip");
            return Ok(());
        }
    };
    cx.probes.hit("arp.payload");

    // The lookup walks every record even when the sender is already known.
    // Only the walk's cost matters here, so it is charged in one go.
    cx.probes.hit("arp.lookup");
    let key = arp.spa.to_string();
    let (known, records) = match cx.state.read(ARP_ADDRESS_MAP)? {
        Some(map) => (map.contains_key(&key), map.len()),
        None => (false, 0),
    };
    cx.probes.hit_n("arp.lookup.scan", records as u64);
    if known {
        cx.probes.hit("arp.lookup.hit");
    } else {
        cx.probes.hit("arp.lookup.miss");
        cx.state
            .write(ARP_ADDRESS_MAP)?
            .insert(key, Value::String(arp.sha.to_string()));
        cx.probes.hit("arp.add");
    }
    Ok(())
}

fn host_tracker(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("host.handle");
    let Payload::Host(host) = &event.payload else {
        return Err(wrong_payload("host-tracker", event));
    };
    if host.name.is_empty() {
        cx.probes.hit("host.reject");
        return Err(HandlerError::domain("host name must be non-empty"));
    }
    match event.subtype {
        Subtype::HostAdded | Subtype::HostUpdated => {
            cx.probes.hit("host.store.put");
            cx.state.write(HOST_STORE)?.insert(
                host.name.clone(),
                json!({ "mac": host.mac.to_string(), "ip": host.ip.to_string() }),
            );
        }
        Subtype::HostRemoved => {
            cx.probes.hit("host.store.remove");
            if cx
                .state
                .write(HOST_STORE)?
                .shift_remove(&host.name)
                .is_none()
            {
                return Err(HandlerError::domain(format!(
                    "unknown host {:?}",
                    host.name
                )));
            }
        }
        _ => return Err(wrong_payload("host-tracker", event)),
    }
    Ok(())
}

fn device_manager(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("device.handle");
    let Payload::Device(device) = &event.payload else {
        return Err(wrong_payload("device-manager", event));
    };
    let key = device.id.to_string();
    match event.subtype {
        Subtype::DeviceAdded => {
            let devices = cx.state.write(DEVICE_STORE)?;
            if devices.contains_key(&key) {
                return Err(HandlerError::domain(format!(
                    "device {key} already present"
                )));
            }
            devices.insert(key, json!({ "ports": device.ports }));
            cx.probes.hit("device.add");
            for &port in &device.ports {
                cx.probes.hit("device.port.announce");
                cx.post(Event::device(
                    Subtype::PortUpdated,
                    crate::event::DeviceInfo {
                        id: device.id,
                        ports: vec![port],
                    },
                ));
            }
        }
        Subtype::DeviceRemoved => {
            cx.probes.hit("device.remove");
            if cx.state.write(DEVICE_STORE)?.shift_remove(&key).is_none() {
                return Err(HandlerError::domain(format!("unknown device {key}")));
            }
        }
        Subtype::PortUpdated => {
            let Some(record) = cx.state.read(DEVICE_STORE)?.and_then(|d| d.get(&key)) else {
                return Err(HandlerError::domain(format!("unknown device {key}")));
            };
            let known: Vec<u64> = record["ports"]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_u64).collect())
                .unwrap_or_default();
            for &port in &device.ports {
                cx.probes.hit("device.port.update");
                if !known.contains(&u64::from(port)) {
                    return Err(HandlerError::domain(format!(
                        "device {key} has no port {port}"
                    )));
                }
            }
        }
        _ => return Err(wrong_payload("device-manager", event)),
    }
    Ok(())
}

fn topology_path(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("topo.handle");
    match &event.payload {
        Payload::Device(device) if event.subtype == Subtype::DeviceRemoved => {
            // A departed device takes its links with it.
            let id = device.id.to_string();
            let links = cx.state.write(TOPOLOGY_LINKS)?;
            let before = links.len();
            links.retain(|_, r| {
                r["a"].as_str() != Some(id.as_str()) && r["b"].as_str() != Some(id.as_str())
            });
            cx.probes
                .hit_n("topo.link.purge", (before - links.len()) as u64);
            Ok(())
        }
        Payload::Link(link) => {
            let devices = cx.state.read(DEVICE_STORE)?;
            let live = |d: &crate::event::DeviceId| {
                devices.is_some_and(|m| m.contains_key(&d.to_string()))
            };
            if !live(&link.src.device) || !live(&link.dst.device) {
                cx.probes.hit("topo.link.reject");
                return Err(HandlerError::domain("link endpoint on unknown device"));
            }
            let key = link.key();
            let links = cx.state.write(TOPOLOGY_LINKS)?;
            match event.subtype {
                Subtype::LinkAdded => {
                    links.insert(
                        key.to_string(),
                        json!({
                            "a": key.0.device.to_string(), "a_port": key.0.port,
                            "b": key.1.device.to_string(), "b_port": key.1.port,
                        }),
                    );
                    cx.probes.hit("topo.link.add");
                }
                Subtype::LinkRemoved => {
                    if links.shift_remove(&key.to_string()).is_none() {
                        return Err(HandlerError::domain(format!("unknown link {key}")));
                    }
                    cx.probes.hit("topo.link.remove");
                }
                _ => return Err(wrong_payload("topology-path", event)),
            }
            Ok(())
        }
        Payload::Config(entry) => {
            if entry.key != PATH_QUERY_KEY {
                cx.probes.hit("topo.config.ignore");
                return Ok(());
            }
            if event.subtype == Subtype::ConfigRemoved {
                cx.probes.hit("topo.query.clear");
                return Ok(());
            }
            let Some((src, dst)) = entry.value.split_once('>') else {
                cx.probes.hit("topo.query.reject");
                return Err(HandlerError::domain(format!(
                    "malformed path query {:?}",
                    entry.value
                )));
            };
            let (src, dst) = (src.trim(), dst.trim());
            let devices = cx.state.read(DEVICE_STORE)?;
            let is_live = |d: &str| devices.is_some_and(|m| m.contains_key(d));
            if !is_live(src) || !is_live(dst) {
                cx.probes.hit("topo.query.reject");
                return Err(HandlerError::domain("path query names an unknown device"));
            }
            let mut nodes: BTreeMap<String, usize> = BTreeMap::new();
            for id in devices.into_iter().flat_map(|m| m.keys()) {
                let next = nodes.len();
                nodes.insert(id.clone(), next);
            }
            let mut adjacency = vec![Vec::new(); nodes.len()];
            if let Some(links) = cx.state.read(TOPOLOGY_LINKS)? {
                for record in links.values() {
                    let end = |field: &str| record[field].as_str().and_then(|d| nodes.get(d));
                    if let (Some(&a), Some(&b)) = (end("a"), end("b")) {
                        cx.probes.hit("topo.graph.load");
                        adjacency[a].push(b);
                        adjacency[b].push(a);
                    }
                }
            }
            enumerate_paths(&adjacency, nodes[src], nodes[dst], cx);
            cx.probes.hit("topo.query.done");
            Ok(())
        }
        _ => Err(wrong_payload("topology-path", event)),
    }
}

/// Depth-first enumeration of every simple path; parallel edges yield
/// distinct paths. Returns the number found before the extension cap.
fn enumerate_paths(
    adjacency: &[Vec<usize>],
    src: usize,
    dst: usize,
    cx: &mut HandlerCx<'_>,
) -> u64 {
    if src == dst {
        return 0;
    }
    let mut on_path = vec![false; adjacency.len()];
    let mut stack: Vec<(usize, usize)> = vec![(src, 0)];
    on_path[src] = true;
    let mut found = 0u64;
    let mut extensions = 0u64;
    while let Some(top) = stack.last_mut() {
        let (node, next) = *top;
        if next == adjacency[node].len() {
            on_path[node] = false;
            stack.pop();
            continue;
        }
        top.1 += 1;
        let neighbor = adjacency[node][next];
        cx.probes.hit("topo.dfs.edge");
        if on_path[neighbor] {
            continue;
        }
        extensions += 1;
        if extensions > PATH_EXTENSION_CAP {
            cx.probes.hit("topo.path.cap");
            break;
        }
        cx.probes.hit("topo.path.extend");
        if neighbor == dst {
            cx.probes.hit("topo.path.found");
            found += 1;
        } else {
            on_path[neighbor] = true;
            stack.push((neighbor, 0));
        }
    }
    found
}

fn port_stats(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("stats.handle");
    match &event.payload {
        Payload::Device(device) if event.subtype == Subtype::PortUpdated => {
            let key = device.id.to_string();
            if !cx
                .state
                .read(DEVICE_STORE)?
                .is_some_and(|d| d.contains_key(&key))
            {
                return Err(HandlerError::domain(format!("unknown device {key}")));
            }
            let samples = cx.state.write(PORT_STATS)?;
            for &port in &device.ports {
                let index = samples.len();
                samples.insert(
                    format!("{index:08}"),
                    json!({ "device": key, "port": port }),
                );
                cx.probes.hit("stats.sample.append");
            }
            Ok(())
        }
        Payload::Config(entry) if entry.key == STATS_QUERY_KEY => {
            if event.subtype == Subtype::ConfigRemoved {
                cx.probes.hit("stats.query.clear");
                return Ok(());
            }
            if let Some(samples) = cx.state.read(PORT_STATS)? {
                cx.probes.hit_n("stats.scan", samples.len() as u64);
            }
            Ok(())
        }
        Payload::Config(_) => {
            cx.probes.hit("stats.config.ignore");
            Ok(())
        }
        _ => Err(wrong_payload("port-stats", event)),
    }
}

fn forwarding(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("fwd.handle");
    let Payload::Packet(packet) = &event.payload else {
        return Err(wrong_payload("forwarding", event));
    };
    if packet.eth_type != EthType::Ipv4 {
        cx.probes.hit("fwd.skip");
        return Ok(());
    }
    cx.probes
        .hit_n("fwd.pipeline.stage", FORWARDING_PIPELINE_COST);
    let known_hosts = cx.state.read(HOST_STORE)?.map_or(0, |h| h.len());
    cx.probes.hit("fwd.host.lookup");
    let flow = format!("{}>{}", packet.eth_src, packet.eth_dst);
    cx.state.write(FLOW_TABLE)?.insert(
        flow,
        json!({ "in_port": packet.in_port, "hosts": known_hosts }),
    );
    cx.probes.hit("fwd.flow.install");
    Ok(())
}

fn benign_echo(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("echo.handle");
    let Payload::Config(entry) = &event.payload else {
        return Err(wrong_payload("benign-echo", event));
    };
    for _ in 0..ECHO_COST {
        cx.probes.hit("echo.body");
    }
    cx.state
        .write(ECHO_LOG)?
        .insert("last".to_owned(), Value::String(entry.key.clone()));
    Ok(())
}

fn benign_counter(_event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("counter.handle");
    let current = cx
        .state
        .read(COUNTER)?
        .and_then(|c| c.get("count"))
        .and_then(Value::as_u64)
        .unwrap_or(0);
    cx.state
        .write(COUNTER)?
        .insert("count".to_owned(), json!(current.saturating_add(1)));
    cx.probes.hit("counter.increment");
    Ok(())
}

fn relay(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("relay.handle");
    let Payload::Config(entry) = &event.payload else {
        return Err(wrong_payload("relay", event));
    };
    if entry.key != RELAY_KEY {
        return Ok(());
    }
    let hops: u64 = entry
        .value
        .parse()
        .map_err(|_| HandlerError::domain(format!("bad hop count {:?}", entry.value)))?;
    if hops > 0 {
        cx.probes.hit("relay.forward");
        cx.post(Event::config(
            Subtype::ConfigUpdated,
            RELAY_KEY,
            (hops - 1).to_string(),
        ));
    }
    Ok(())
}

fn generic(event: &Event, cx: &mut HandlerCx<'_>) -> Result<(), HandlerError> {
    cx.probes.hit("generic.handle");
    let service = cx.service;
    for object in &service.reads {
        cx.probes.hit("generic.read");
        cx.state.read(object)?;
    }
    for object in &service.writes {
        cx.probes.hit("generic.write");
        cx.state
            .write(object)?
            .insert("last".to_owned(), Value::String(event.subtype.to_string()));
    }
    Ok(())
}
