use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use proptest::prelude::*;
use spider_core::depgraph::EventTypeSet;
use spider_core::event::{
    ArpBody, DeviceId, DeviceInfo, EthType, Event, EventFilter, EventKind, HostInfo, MacAddr,
    PacketInfo, Subtype, ARP_REQUEST,
};
use spider_core::generators::{generate_sequence, ChoiceStream, GeneratorState};
use spider_core::testbed::behaviors::{ARP_ADDRESS_MAP, DEVICE_STORE, HOST_STORE, RELAY_KEY};
use spider_core::testbed::fixtures::testbed_registry;
use spider_core::testbed::{
    ingest_message, Behavior, Controller, DispatchError, HandlerError, ServiceDescriptor,
    ServiceRegistry, StoreError, CASCADE_DEPTH_CAP,
};

fn arp_request(sender: Ipv4Addr) -> Event {
    let sha = MacAddr::local(sender.octets());
    Event::packet_in(PacketInfo {
        in_port: 1,
        eth_src: sha,
        eth_dst: MacAddr::BROADCAST,
        eth_type: EthType::Arp,
        arp: Some(ArpBody {
            op: ARP_REQUEST,
            spa: sender,
            sha,
            tpa: Ipv4Addr::new(10, 9, 9, 9),
            tha: MacAddr::ZERO,
        }),
    })
}

fn only(registry: ServiceRegistry, ids: &[&str]) -> Controller {
    let ids: BTreeSet<String> = ids.iter().map(|s| s.to_string()).collect();
    Controller::with_services(registry, &ids).unwrap()
}

fn sender(i: u32) -> Ipv4Addr {
    Ipv4Addr::from(0x0a00_0000 + i)
}

#[test]
fn arp_scan_count_equals_distinct_senders() {
    for n in [0u32, 1, 10, 500] {
        let mut c = only(testbed_registry(), &["arp-cache"]);
        for i in 0..n {
            c.dispatch(&arp_request(sender(i))).unwrap();
        }
        let (_, miss) = c.dispatch_traced(&arp_request(sender(n))).unwrap();
        assert_eq!(miss.count("arp.lookup.scan"), u64::from(n));
        // handle, payload, lookup, miss, add
        assert_eq!(miss.path_length, 5 + u64::from(n));
        assert_eq!(miss.count("arp.lookup.miss"), 1);

        // A known sender walks the same records and skips the insert.
        let (_, hit) = c.dispatch_traced(&arp_request(sender(0))).unwrap();
        assert_eq!(hit.count("arp.lookup.scan"), u64::from(n) + 1);
        assert_eq!(hit.path_length, 4 + u64::from(n) + 1);
        assert_eq!(c.store().len_of(ARP_ADDRESS_MAP), n as usize + 1);
    }
}

#[test]
fn repeated_sender_does_not_grow_the_map() {
    let mut c = only(testbed_registry(), &["arp-cache"]);
    for _ in 0..20 {
        c.dispatch(&arp_request(sender(7))).unwrap();
    }
    assert_eq!(c.store().len_of(ARP_ADDRESS_MAP), 1);
}

#[test]
fn non_arp_packets_are_skipped() {
    let mut c = only(testbed_registry(), &["arp-cache"]);
    let event = ingest_message(
        r#"{"type":"packet_in","in_port":2,"eth_src":"02:00:0a:00:00:01","eth_dst":"02:00:0a:00:00:02","eth_type":"ipv4"}"#,
    )
    .unwrap();
    let (_, trace) = c.dispatch_traced(&event).unwrap();
    assert_eq!(trace.path_length, 2);
    assert_eq!(trace.count("arp.skip"), 1);
}

#[test]
fn openflow_arp_reaches_the_cache() {
    let mut c = only(testbed_registry(), &["arp-cache"]);
    let event = ingest_message(
        r#"{"type":"packet_in","in_port":1,"eth_src":"02:00:0a:00:00:01","eth_dst":"ff:ff:ff:ff:ff:ff","eth_type":"arp",
            "arp":{"op":1,"spa":"10.0.0.1","sha":"02:00:0a:00:00:01","tpa":"10.0.0.2","tha":"00:00:00:00:00:00"}}"#,
    )
    .unwrap();
    let result = c.dispatch(&event).unwrap();
    assert_eq!(result.handled_by, vec!["arp-cache"]);
    assert_eq!(c.store().len_of(ARP_ADDRESS_MAP), 1);
}

#[test]
fn device_add_announces_ports_to_port_stats() {
    let mut c = Controller::new(testbed_registry());
    let result = c
        .dispatch(&Event::device(
            Subtype::DeviceAdded,
            DeviceInfo {
                id: DeviceId(3),
                ports: vec![1, 2, 3],
            },
        ))
        .unwrap();
    assert!(result.is_clean(), "{:?}", result.errors);
    assert_eq!(result.handled_by, vec!["device-manager"]);
    assert_eq!(result.derived_events.len(), 3);
    assert!(result
        .derived_events
        .iter()
        .all(|e| e.subtype == Subtype::PortUpdated));
    assert_eq!(c.store().len_of(DEVICE_STORE), 1);
    assert_eq!(c.store().len_of("port.stats"), 3);
}

#[test]
fn handler_errors_are_recorded_not_raised() {
    let mut c = Controller::new(testbed_registry());
    let host = HostInfo {
        name: "h1".into(),
        mac: MacAddr::local([10, 0, 0, 1]),
        ip: Ipv4Addr::new(10, 0, 0, 1),
    };
    let result = c
        .dispatch(&Event::host(Subtype::HostRemoved, host))
        .unwrap();
    assert_eq!(result.errors.len(), 1);
    assert_eq!(result.errors[0].service, "host-tracker");
    assert!(matches!(result.errors[0].error, HandlerError::Domain(_)));
    // benign-counter still ran on the same event.
    assert!(result.handled_by.contains(&"benign-counter".to_string()));
}

fn relay_registry() -> ServiceRegistry {
    ServiceRegistry::from_descriptors(vec![ServiceDescriptor::new("relay", Behavior::Relay)
        .handling(EventFilter::kind(EventKind::ConfigEvent))])
    .unwrap()
}

#[test]
fn cascade_depth_is_capped() {
    let mut c = Controller::new(relay_registry());
    let hops = |h: usize| Event::config(Subtype::ConfigAdded, RELAY_KEY, h.to_string());
    let ok = c.dispatch(&hops(CASCADE_DEPTH_CAP)).unwrap();
    assert_eq!(ok.derived_events.len(), CASCADE_DEPTH_CAP);
    for h in [CASCADE_DEPTH_CAP + 1, 20] {
        assert!(matches!(
            c.dispatch(&hops(h)),
            Err(DispatchError::CascadeOverflow)
        ));
    }
    // An overflow inside a trace leaves no trace active.
    assert!(c.dispatch_traced(&hops(20)).is_err());
    assert!(c.dispatch_traced(&hops(1)).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A service that touches state it did not declare gets a store error.
    #[test]
    fn undeclared_access_is_caught(declare_read in any::<bool>(), declare_write in any::<bool>(), ip in any::<u32>()) {
        let mut desc = ServiceDescriptor::new("arp", Behavior::ArpCache)
            .handling(EventFilter::kind(EventKind::PacketIn));
        if declare_read {
            desc = desc.reading(ARP_ADDRESS_MAP);
        }
        if declare_write {
            desc = desc.writing(ARP_ADDRESS_MAP);
        }
        let mut c = Controller::new(ServiceRegistry::from_descriptors(vec![desc]).unwrap());
        let result = c.dispatch(&arp_request(Ipv4Addr::from(ip))).unwrap();
        let expected = match (declare_read, declare_write) {
            (false, _) => Some("read"),
            (true, false) => Some("write"),
            (true, true) => None,
        };
        match expected {
            None => prop_assert!(result.is_clean()),
            Some(kind) => {
                prop_assert_eq!(result.errors.len(), 1);
                let store_error = match &result.errors[0].error {
                    HandlerError::Store(e) => e.clone(),
                    other => panic!("expected a store error, got {other:?}"),
                };
                let matches_kind = match store_error {
                    StoreError::UndeclaredRead { object, .. } => kind == "read" && object == ARP_ADDRESS_MAP,
                    StoreError::UndeclaredWrite { object, .. } => kind == "write" && object == ARP_ADDRESS_MAP,
                };
                prop_assert!(matches_kind);
                prop_assert_eq!(c.store().len_of(ARP_ADDRESS_MAP), 0);
            }
        }
    }

    /// The same sequence after a reset gives the same results and state.
    #[test]
    fn dispatch_is_deterministic(seed in any::<u64>(), n in 1usize..120) {
        let registry = testbed_registry();
        let types = EventTypeSet::new(registry.services().iter().flat_map(|s| s.handles.iter().copied()));
        let events = generate_sequence(&types, n, &mut ChoiceStream::with_filler(vec![], seed), &mut GeneratorState::new()).unwrap();

        let mut first = Controller::new(registry.clone());
        let a: Vec<_> = events.iter().map(|e| first.dispatch(e).unwrap()).collect();
        let store_a = serde_json::to_string(first.store()).unwrap();

        // Reuse the controller after a reset, and also compare with a fresh one.
        first.reset_state();
        let b: Vec<_> = events.iter().map(|e| first.dispatch(e).unwrap()).collect();
        let mut fresh = Controller::new(registry);
        let c: Vec<_> = events.iter().map(|e| fresh.dispatch(e).unwrap()).collect();

        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
        prop_assert_eq!(&store_a, &serde_json::to_string(first.store()).unwrap());
        prop_assert_eq!(&store_a, &serde_json::to_string(fresh.store()).unwrap());
    }
}

#[test]
fn reset_clears_every_object() {
    let mut c = Controller::new(testbed_registry());
    for i in 0..5 {
        c.dispatch(&arp_request(sender(i))).unwrap();
    }
    c.dispatch(&Event::host(
        Subtype::HostAdded,
        HostInfo {
            name: "h".into(),
            mac: MacAddr::local([10, 0, 0, 9]),
            ip: Ipv4Addr::new(10, 0, 0, 9),
        },
    ))
    .unwrap();
    assert!(!c.store().is_empty());
    c.reset_state();
    assert!(c.store().is_empty());
    assert_eq!(c.store().len_of(HOST_STORE), 0);
}
