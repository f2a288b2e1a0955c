//! DTindexing: the single registry of datastores (pods) and their resources.

use super::records::{PodRecord, PodType, ResourceRecord};
use crate::identity::PublicKey;
use crate::ledger::{Address, Revert};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtIndexing {
    pods_counter: u64,
    resource_counter: u64,
    /// Stored but not interpreted; subscription logic belongs to the market.
    dt_subscription: u64,
    pod_list: Vec<PodRecord>,
    resource_list: Vec<ResourceRecord>,
    pub(super) oracle: Address,
}

impl DtIndexing {
    pub(super) fn new(oracle: Address) -> Self {
        Self { pods_counter: 0, resource_counter: 0, dt_subscription: 0, pod_list: Vec::new(), resource_list: Vec::new(), oracle }
    }

    pub fn pods(&self) -> &[PodRecord] {
        &self.pod_list
    }

    pub fn resources(&self) -> &[ResourceRecord] {
        &self.resource_list
    }

    pub fn counters(&self) -> (u64, u64) {
        (self.pods_counter, self.resource_counter)
    }

    pub fn pod(&self, id: u64) -> Option<&PodRecord> {
        self.pod_list.iter().find(|p| p.id == id)
    }

    pub fn resource(&self, id: u64) -> Option<&ResourceRecord> {
        self.resource_list.iter().find(|r| r.id == id)
    }

    /// Next pod id; the pod itself is appended by [`Self::push_pod`] once its
    /// obligations contract exists.
    pub(super) fn next_pod_id(&self) -> u64 {
        self.pods_counter + 1
    }

    pub(super) fn push_pod(&mut self, record: PodRecord) {
        debug_assert_eq!(record.id, self.pods_counter + 1);
        self.pods_counter = record.id;
        self.pod_list.push(record);
    }

    /// `validPodId(id, owner)`: the pod exists, is active and belongs to `owner`.
    pub(super) fn valid_pod_id(&self, id: u64, owner: &PublicKey) -> Result<&PodRecord, Revert> {
        match self.pod(id) {
            Some(p) if p.is_active && p.owner == *owner => Ok(p),
            _ => Err(Revert::new("validPodId")),
        }
    }

    pub(super) fn register_resource(&mut self, sender: &PublicKey, pod_id: u64, url: String, subscription_id: u64) -> Result<u64, Revert> {
        self.valid_pod_id(pod_id, sender)?;
        if url.is_empty() {
            return Err(Revert::new("emptyUrl"));
        }
        self.dt_subscription = subscription_id;
        self.resource_counter += 1;
        let id = self.resource_counter;
        self.resource_list.push(ResourceRecord { id, owner: *sender, pod_id, url, is_active: true });
        Ok(id)
    }

    pub(super) fn deactivate_resource(&mut self, sender: &PublicKey, id: u64) -> Result<ResourceRecord, Revert> {
        let record = self.resource_list.iter_mut().find(|r| r.id == id && r.is_active).ok_or_else(|| Revert::new("validResourceId"))?;
        if record.owner != *sender {
            return Err(Revert::new("NotOwner"));
        }
        record.is_active = false;
        Ok(record.clone())
    }

    pub(super) fn deactivate_pod(&mut self, sender: &PublicKey, id: u64) -> Result<PodRecord, Revert> {
        self.valid_pod_id(id, sender)?;
        let pod = self.pod_list.iter_mut().find(|p| p.id == id).expect("validated above");
        pod.is_active = false;
        Ok(pod.clone())
    }

    /// Active resources of an active pod, by id.
    pub fn pod_resources(&self, pod_id: u64) -> Result<Vec<ResourceRecord>, Revert> {
        let pod = self.pod(pod_id).ok_or_else(|| Revert::new("UnknownId"))?;
        if !pod.is_active {
            return Ok(Vec::new());
        }
        Ok(self.resource_list.iter().filter(|r| r.pod_id == pod_id && r.is_active).cloned().collect())
    }

    pub fn search_by_type(&self, pod_type: PodType) -> Vec<PodRecord> {
        self.pod_list.iter().filter(|p| p.is_active && p.pod_type == pod_type).cloned().collect()
    }
}
