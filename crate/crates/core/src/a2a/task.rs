use serde::{Deserialize, Serialize};

use super::message::Message;
use super::part::Part;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Submitted,
    Working,
    Completed,
    Failed,
}

impl TaskState {
    pub fn can_transition_to(self, next: TaskState) -> bool {
        use TaskState::*;
        matches!((self, next), (Submitted, Working) | (Working, Completed) | (Working, Failed))
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Completed | TaskState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("illegal task transition {from:?} -> {to:?}")]
pub struct IllegalTransition {
    pub from: TaskState,
    pub to: TaskState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskStatus {
    pub state: TaskState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct A2ATask {
    pub id: String,
    pub status: TaskStatus,
    #[serde(default)]
    pub history: Vec<Message>,
    #[serde(default)]
    pub artifacts: Vec<Part>,
}

impl A2ATask {
    pub fn submitted(id: impl Into<String>, request: Message) -> Self {
        Self {
            id: id.into(),
            status: TaskStatus { state: TaskState::Submitted, message: None },
            history: vec![request],
            artifacts: Vec::new(),
        }
    }

    pub fn state(&self) -> TaskState {
        self.status.state
    }

    pub fn transition(&mut self, to: TaskState, note: Option<String>) -> Result<(), IllegalTransition> {
        let from = self.status.state;
        if !from.can_transition_to(to) {
            return Err(IllegalTransition { from, to });
        }
        self.status = TaskStatus { state: to, message: note };
        Ok(())
    }
}

/// Incremental update delivered over a `tasks/sendSubscribe` stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskUpdate {
    #[serde(rename_all = "camelCase")]
    StatusUpdate {
        task_id: String,
        status: TaskStatus,
        #[serde(rename = "final")]
        is_final: bool,
    },
    #[serde(rename_all = "camelCase")]
    ArtifactUpdate { task_id: String, artifact: Part },
}

impl TaskUpdate {
    pub fn is_final(&self) -> bool {
        matches!(self, TaskUpdate::StatusUpdate { is_final: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskSendParams {
    pub id: String,
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskQueryParams {
    pub id: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a2a::Role;

    #[test]
    fn lifecycle_transitions() {
        use TaskState::*;
        let all = [Submitted, Working, Completed, Failed];
        let allowed: Vec<_> = all
            .iter()
            .flat_map(|a| all.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.can_transition_to(*b))
            .collect();
        assert_eq!(allowed, vec![(Submitted, Working), (Working, Completed), (Working, Failed)]);

        let mut t = A2ATask::submitted("t1", Message::new(Role::User, "m", vec![Part::text("x")]));
        assert!(t.transition(Completed, None).is_err());
        t.transition(Working, None).unwrap();
        t.transition(Completed, None).unwrap();
        assert!(t.transition(Working, None).is_err());
    }

    #[test]
    fn update_wire_shape() {
        let u = TaskUpdate::StatusUpdate {
            task_id: "t".into(),
            status: TaskStatus { state: TaskState::Working, message: None },
            is_final: false,
        };
        let v = serde_json::to_value(&u).unwrap();
        assert_eq!(v["kind"], "status-update");
        assert_eq!(v["taskId"], "t");
        assert_eq!(v["final"], false);
    }
}
