// Console state: a pure reducer over received frames and snapshots.
// Nothing in here simulates the world — every rendered mission state is a
// MISSION_STATUS frame the hub actually sent, every pose comes from a
// snapshot or telemetry payload.

import type { Frame } from "./protocol.js";

export type ConnectionStatus = "disconnected" | "connecting" | "connected";

export interface TimelineEntry {
  tick: number;
  state: string;
  event: string;
}

export interface MissionTimeline {
  missionId: string;
  missionType: string;
  state: string;
  executor: string | null;
  participants: string[];
  timeline: TimelineEntry[];
}

export interface OpenRequest {
  requestId: string;
  missionId: string;
  subject: string;
  subjectAgent: string;
  deadlineTick: number;
  answered: boolean;
}

export type ProposalStatus = "pending" | "approved" | "dismissed" | "stale";

export interface Proposal {
  proposalId: string;
  beneficiary: string;
  helper: string | null;
  feasible: boolean;
  tick: number;
  status: ProposalStatus;
}

export interface AlertEntry {
  tick: number;
  src: string;
  alert: string;
  level: number | null;
}

export interface Snapshot {
  tick: number;
  world: {
    bounds: { xmin: number; ymin: number; xmax: number; ymax: number };
    obstacles: { xmin: number; ymin: number; xmax: number; ymax: number }[];
    agents: Record<string, {
      kind: string;
      pose: { x: number; y: number; heading: number };
      battery: number;
      carrying: string | null;
      immobilized: boolean;
    }>;
    objects: Record<string, {
      object_class: string;
      pose: { x: number; y: number; heading: number };
      carried_by: string | null;
      spent: boolean;
    }>;
  };
  missions: {
    mission_id: string;
    mission_type: string;
    state: string;
    participants: string[];
    history: [number, string, string][];
  }[];
  sessions: { agent_id: string; kind: string }[];
  proposals: Record<string, unknown>[];
  open_requests: Record<string, unknown>[];
  telemetry: Record<string, Record<string, unknown>>;
}

export interface Detection {
  tick: number;
  targetId: string;
  targetClass: string;
  confidence: number;
}

export interface ConsoleState {
  connection: ConnectionStatus;
  detectionThreshold: number | null;
  tick: number;
  snapshot: Snapshot | null;
  missions: Record<string, MissionTimeline>;
  requests: Record<string, OpenRequest>;
  proposals: Record<string, Proposal>;
  alerts: AlertEntry[];
  detections: Detection[];
  notices: string[];
  errors: string[];
}

export function initialState(): ConsoleState {
  return {
    connection: "disconnected",
    detectionThreshold: null,
    tick: 0,
    snapshot: null,
    missions: {},
    requests: {},
    proposals: {},
    alerts: [],
    detections: [],
    notices: [],
    errors: [],
  };
}

const TERMINAL = new Set(["Completed", "Unverified", "Aborted"]);

export function requestExpired(req: OpenRequest, tick: number): boolean {
  return tick > req.deadlineTick;
}

export function ticksRemaining(req: OpenRequest, tick: number): number {
  return Math.max(0, req.deadlineTick - tick);
}

/** Apply one received frame; returns a new state object. */
export function applyFrame(state: ConsoleState, frame: Frame): ConsoleState {
  const next: ConsoleState = { ...state, tick: Math.max(state.tick, frame.tick) };
  const p = frame.payload as Record<string, any>;

  switch (frame.type) {
    case "WELCOME": {
      next.connection = "connected";
      next.detectionThreshold =
        typeof p.detection_threshold === "number" ? p.detection_threshold : null;
      break;
    }

    case "MISSION_STATUS": {
      const id = String(p.mission_id ?? "");
      if (!id) break;
      const prev = state.missions[id];
      const entry: TimelineEntry = {
        tick: frame.tick,
        state: String(p.state ?? ""),
        event: String(p.event ?? ""),
      };
      const timeline: MissionTimeline = {
        missionId: id,
        missionType: String(p.mission_type ?? prev?.missionType ?? ""),
        state: entry.state,
        executor: (p.executor as string | null) ?? prev?.executor ?? null,
        participants: (p.participants as string[]) ?? prev?.participants ?? [],
        timeline: [...(prev?.timeline ?? []), entry],
      };
      next.missions = { ...state.missions, [id]: timeline };

      // an M3 covering a beneficiary makes their pending proposal stale
      if (timeline.missionType === "M3") {
        const proposals = { ...next.proposals };
        for (const key of Object.keys(proposals)) {
          const prop = proposals[key];
          if (prop.status === "pending" &&
              timeline.participants.includes(prop.beneficiary)) {
            proposals[key] = { ...prop, status: "stale" };
          }
        }
        next.proposals = proposals;
      }
      if (TERMINAL.has(entry.state)) {
        // close any open requests attached to the finished mission
        const requests = { ...next.requests };
        for (const key of Object.keys(requests)) {
          if (requests[key].missionId === id) {
            requests[key] = { ...requests[key], answered: true };
          }
        }
        next.requests = requests;
      }
      break;
    }

    case "CORR_REQUEST": {
      const req: OpenRequest = {
        requestId: String(p.request_id),
        missionId: String(p.mission_id ?? ""),
        subject: String(p.subject ?? ""),
        subjectAgent: String(p.subject_agent ?? ""),
        deadlineTick: Number(p.deadline_tick ?? frame.tick),
        answered: false,
      };
      next.requests = { ...state.requests, [req.requestId]: req };
      break;
    }

    case "EVENT": {
      if (p.event === "collaboration_proposal") {
        const prop: Proposal = {
          proposalId: String(p.proposal_id),
          beneficiary: String(p.beneficiary),
          helper: (p.helper as string | null) ?? null,
          feasible: Boolean(p.feasible),
          tick: frame.tick,
          status: "pending",
        };
        next.proposals = { ...state.proposals, [prop.proposalId]: prop };
      } else {
        next.notices = [...state.notices, `${p.event} @${frame.tick}`];
      }
      break;
    }

    case "ALERT": {
      next.alerts = [...state.alerts, {
        tick: frame.tick,
        src: frame.src,
        alert: String(p.alert ?? "alert"),
        level: typeof p.level === "number" ? p.level : null,
      }];
      break;
    }

    case "DETECTION": {
      next.detections = [...state.detections.slice(-49), {
        tick: frame.tick,
        targetId: String(p.target_id ?? ""),
        targetClass: String(p.target_class ?? ""),
        confidence: Number(p.confidence ?? 0),
      }];
      break;
    }

    case "ERROR": {
      next.errors = [...state.errors, String(p.reason ?? "unknown error")];
      break;
    }

    default:
      break;
  }
  return next;
}

export function applySnapshot(state: ConsoleState, snap: Snapshot): ConsoleState {
  return { ...state, snapshot: snap, tick: Math.max(state.tick, snap.tick) };
}

export function markProposal(
  state: ConsoleState, proposalId: string, status: ProposalStatus,
): ConsoleState {
  const prop = state.proposals[proposalId];
  if (!prop) return state;
  return {
    ...state,
    proposals: { ...state.proposals, [proposalId]: { ...prop, status } },
  };
}

export function markRequestAnswered(
  state: ConsoleState, requestId: string,
): ConsoleState {
  const req = state.requests[requestId];
  if (!req) return state;
  return {
    ...state,
    requests: { ...state.requests, [requestId]: { ...req, answered: true } },
  };
}

export function addNotice(state: ConsoleState, text: string): ConsoleState {
  return { ...state, notices: [...state.notices, text] };
}
