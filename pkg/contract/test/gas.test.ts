import { writeFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { describe, expect, it } from 'vitest';
import { DevChain } from '../src/chain';
import { deriveAddress } from '../src/trace';

const KEY_A = '1a'.repeat(32);
const KEY_B = '2b'.repeat(32);
const CID = '0x' + '3c'.repeat(32);
const REPORT = join(dirname(fileURLToPath(import.meta.url)), '..', 'gas-report.json');

describe('measured gas', () => {
  it('orders request > respond > share over a full exchange', async () => {
    const chain = await DevChain.create();
    const producer = deriveAddress(KEY_A);
    const consumer = deriveAddress(KEY_B);
    await chain.callFrom(producer, 'register', ['0x' + KEY_A]);
    await chain.callFrom(consumer, 'register', ['0x' + KEY_B]);

    const share = await chain.callFrom(producer, 'share', [CID, 'ransomware', '2023-01-05T09:00:00Z']);
    const request = await chain.callFrom(consumer, 'request', [1, CID]);
    const respond = await chain.callFrom(producer, 'respond', [1, CID]);
    for (const step of [share, request, respond]) expect(step.ok).toBe(true);

    const gas = {
      share: Number(share.gasTotal),
      request: Number(request.gasTotal),
      respond: Number(respond.gasTotal),
    };
    writeFileSync(REPORT, JSON.stringify(gas, null, 2) + '\n');

    expect(gas.request).toBeGreaterThan(gas.respond);
    expect(gas.respond).toBeGreaterThan(gas.share);
  });
});
