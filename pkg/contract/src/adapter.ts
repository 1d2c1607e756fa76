import { DevChain } from './chain';

// Call trace format shared with the reference ledger's replay command.
export type TraceCall =
  | { op: 'register'; pubkey: string }
  | { op: 'share'; caller: string; cid: string; threat_type: string; created_at: string }
  | { op: 'request'; caller: string; share_id: number; cid: string }
  | { op: 'respond'; caller: string; request_id: number; cid: string };

export interface Outcome {
  ok: boolean;
  error?: string;
  address?: string;
  share_id?: number;
  request_id?: number;
}

export interface ReplayResult {
  outcomes: Outcome[];
  records: Record<string, unknown>[];
  events: string[];
  /** live chain handle, for storage audits after the replay */
  chain: DevChain;
}

const CID_PREFIX = 'sha256:';

// Records keep cids as strings; on chain they are opaque 32-byte digests.
function cidToBytes32(cid: string): string {
  if (!cid.startsWith(CID_PREFIX) || cid.length !== CID_PREFIX.length + 64) {
    throw new Error(`cannot pack cid ${JSON.stringify(cid)} into bytes32`);
  }
  return '0x' + cid.slice(CID_PREFIX.length);
}

function bytes32ToCid(word: string): string {
  return CID_PREFIX + word.slice(2).toLowerCase();
}

function bareAddress(checksummed: string): string {
  return checksummed.toLowerCase().slice(2);
}

// register carries no caller; the contract ignores msg.sender for it.
const OPERATOR = 'ac'.repeat(20);

/**
 * Drive a fresh on-chain DataStorage through a recorded call trace, shaping
 * the result exactly like the reference ledger's replay: per-call outcomes,
 * record state in append order, and the event-kind sequence.
 */
export async function replayOnChain(calls: TraceCall[]): Promise<ReplayResult> {
  const chain = await DevChain.create();
  const outcomes: Outcome[] = [];
  const records: Record<string, unknown>[] = [];
  const events: string[] = [];

  for (const call of calls) {
    let result;
    switch (call.op) {
      case 'register':
        result = await chain.callFrom(OPERATOR, 'register', ['0x' + call.pubkey]);
        break;
      case 'share':
        result = await chain.callFrom(call.caller, 'share', [
          cidToBytes32(call.cid),
          call.threat_type,
          call.created_at,
        ]);
        break;
      case 'request':
        result = await chain.callFrom(call.caller, 'request', [
          call.share_id,
          cidToBytes32(call.cid),
        ]);
        break;
      case 'respond':
        result = await chain.callFrom(call.caller, 'respond', [
          call.request_id,
          cidToBytes32(call.cid),
        ]);
        break;
    }

    if (!result.ok) {
      outcomes.push({ ok: false, error: result.error });
      continue;
    }
    switch (call.op) {
      case 'register':
        outcomes.push({ ok: true, address: bareAddress(result.returned![0] as string) });
        break;
      case 'share':
        outcomes.push({ ok: true, share_id: Number(result.returned![0]) });
        break;
      case 'request':
        outcomes.push({ ok: true, request_id: Number(result.returned![0]) });
        break;
      case 'respond':
        outcomes.push({ ok: true });
        break;
    }
    for (const log of result.logs) {
      events.push(log.name);
      if (log.name === 'ShareAdded') {
        records.push({
          kind: 'share',
          share_id: Number(log.args.shareId),
          producer: bareAddress(log.args.producer as string),
          cid: bytes32ToCid(log.args.cid as string),
          metadata: { created_at: log.args.createdAt, threat_type: log.args.threatType },
        });
      } else if (log.name === 'RequestAdded') {
        records.push({
          kind: 'request',
          request_id: Number(log.args.requestId),
          share_id: Number(log.args.shareId),
          consumer: bareAddress(log.args.consumer as string),
          cid: bytes32ToCid(log.args.cid as string),
        });
      } else if (log.name === 'ResponseAdded') {
        records.push({
          kind: 'response',
          request_id: Number(log.args.requestId),
          cid: bytes32ToCid(log.args.cid as string),
        });
      }
    }
  }
  return { outcomes, records, events, chain };
}

/**
 * Cross-check event-derived records against contract storage getters.
 * Returns human-readable mismatch descriptions; empty means consistent.
 */
export async function auditStorage(
  chain: DevChain,
  records: Record<string, unknown>[],
): Promise<string[]> {
  const problems: string[] = [];
  const expect = (cond: boolean, label: string) => {
    if (!cond) problems.push(label);
  };

  let shares = 0;
  let requests = 0;
  for (const record of records) {
    if (record.kind === 'share') {
      shares += 1;
      const id = record.share_id as number;
      const got = await chain.callFrom(OPERATOR, 'producerOf', [id]);
      expect(got.ok && bareAddress(got.returned![0] as string) === record.producer,
        `share ${id}: stored producer differs from event`);
    } else if (record.kind === 'request') {
      requests += 1;
      const id = record.request_id as number;
      const got = await chain.callFrom(OPERATOR, 'getRequest', [id]);
      expect(got.ok, `request ${id}: not readable`);
      if (got.ok) {
        expect(Number(got.returned![0]) === record.share_id, `request ${id}: share id differs`);
        expect(bareAddress(got.returned![1] as string) === record.consumer,
          `request ${id}: consumer differs`);
        expect(bytes32ToCid(got.returned![2] as string) === record.cid,
          `request ${id}: cid differs`);
      }
    } else {
      const id = record.request_id as number;
      const got = await chain.callFrom(OPERATOR, 'getResponse', [id]);
      expect(got.ok && bytes32ToCid(got.returned![0] as string) === record.cid,
        `response to request ${id}: cid differs`);
    }
  }
  const shareCount = await chain.callFrom(OPERATOR, 'shareCount', []);
  const requestCount = await chain.callFrom(OPERATOR, 'requestCount', []);
  expect(Number(shareCount.returned![0]) === shares, 'share count differs from record count');
  expect(Number(requestCount.returned![0]) === requests, 'request count differs from record count');
  return problems;
}
