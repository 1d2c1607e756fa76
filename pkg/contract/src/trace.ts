import { createHash } from 'node:crypto';
import type { TraceCall } from './adapter';

/** Small deterministic PRNG so every trace is reproducible from its seed. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function deriveAddress(pubkeyHex: string): string {
  return createHash('sha256').update(Buffer.from(pubkeyHex, 'hex')).digest().subarray(0, 20).toString('hex');
}

const THREAT_TYPES = ['ransomware', 'phishing', 'botnet', 'apt', 'worm', ''];
const TIMESTAMPS = [
  '2023-01-05T09:00:00Z',
  '2023-02-11T14:30:00Z',
  '2023-03-20T23:59:59Z',
  '2023-06-01T00:00:00Z',
];

interface Org {
  pubkey: string;
  address: string;
  registered: boolean;
}

interface ShareState {
  id: number;
  producer: string;
}

interface RequestState {
  id: number;
  producer: string;
  responded: boolean;
}

function pick<T>(rng: () => number, items: T[]): T {
  return items[Math.floor(rng() * items.length)];
}

function hexBytes(rng: () => number, n: number): string {
  let out = '';
  for (let i = 0; i < n; i += 1) {
    out += Math.floor(rng() * 256).toString(16).padStart(2, '0');
  }
  return out;
}

/**
 * Generate one randomized call sequence: organic register/share/request/
 * respond traffic with targeted invalid calls mixed in (duplicate
 * registration, unregistered callers, unknown ids, self-requests,
 * non-producer and duplicate responses).
 *
 * The generator tracks expected id assignment only to aim its calls; the
 * two replayers under test decide the actual outcomes.
 */
export function generateTrace(seed: number): TraceCall[] {
  const rng = mulberry32(seed);
  const calls: TraceCall[] = [];
  const orgs: Org[] = [];
  const shares: ShareState[] = [];
  const requests: RequestState[] = [];

  const registered = () => orgs.filter((o) => o.registered);
  const cid = () => 'sha256:' + hexBytes(rng, 32);

  const newOrg = (): Org => {
    const pubkey = hexBytes(rng, 32);
    const org = { pubkey, address: deriveAddress(pubkey), registered: false };
    orgs.push(org);
    return org;
  };

  const register = () => {
    const dupPool = registered();
    if (dupPool.length > 0 && rng() < 0.25) {
      calls.push({ op: 'register', pubkey: pick(rng, dupPool).pubkey });
      return;
    }
    const org = newOrg();
    calls.push({ op: 'register', pubkey: org.pubkey });
    org.registered = true;
  };

  const share = () => {
    const pool = registered();
    if (pool.length === 0 || rng() < 0.15) {
      calls.push({
        op: 'share',
        caller: newOrg().address,
        cid: cid(),
        threat_type: pick(rng, THREAT_TYPES),
        created_at: pick(rng, TIMESTAMPS),
      });
      return;
    }
    const producer = pick(rng, pool);
    calls.push({
      op: 'share',
      caller: producer.address,
      cid: cid(),
      threat_type: pick(rng, THREAT_TYPES),
      created_at: pick(rng, TIMESTAMPS),
    });
    shares.push({ id: shares.length + 1, producer: producer.address });
  };

  const request = () => {
    const pool = registered();
    if (shares.length === 0 || pool.length === 0) {
      register();
      return;
    }
    const roll = rng();
    if (roll < 0.12) {
      calls.push({ op: 'request', caller: newOrg().address, share_id: pick(rng, shares).id, cid: cid() });
      return;
    }
    if (roll < 0.27) {
      const caller = pick(rng, pool);
      calls.push({
        op: 'request',
        caller: caller.address,
        share_id: shares.length + 1 + Math.floor(rng() * 4),
        cid: cid(),
      });
      return;
    }
    const target = pick(rng, shares);
    if (roll < 0.42) {
      calls.push({ op: 'request', caller: target.producer, share_id: target.id, cid: cid() });
      return;
    }
    const consumers = pool.filter((o) => o.address !== target.producer);
    if (consumers.length === 0) {
      register();
      return;
    }
    calls.push({ op: 'request', caller: pick(rng, consumers).address, share_id: target.id, cid: cid() });
    requests.push({ id: requests.length + 1, producer: target.producer, responded: false });
  };

  const respond = () => {
    const pool = registered();
    if (requests.length === 0 || pool.length === 0) {
      request();
      return;
    }
    const roll = rng();
    if (roll < 0.15) {
      calls.push({
        op: 'respond',
        caller: pick(rng, pool).address,
        request_id: requests.length + 1 + Math.floor(rng() * 4),
        cid: cid(),
      });
      return;
    }
    const target = pick(rng, requests);
    if (roll < 0.33) {
      const outsiders = pool.filter((o) => o.address !== target.producer);
      if (outsiders.length > 0) {
        calls.push({ op: 'respond', caller: pick(rng, outsiders).address, request_id: target.id, cid: cid() });
        return;
      }
    }
    calls.push({ op: 'respond', caller: target.producer, request_id: target.id, cid: cid() });
    target.responded = true; // duplicates picked later become AlreadyResponded
  };

  const length = 8 + Math.floor(rng() * 18);
  while (calls.length < length) {
    const roll = rng();
    if (roll < 0.18) register();
    else if (roll < 0.42) share();
    else if (roll < 0.72) request();
    else respond();
  }
  return calls;
}
