import { VM } from '@ethereumjs/vm';
import { Chain, Common, Hardfork } from '@ethereumjs/common';
import { Address, hexToBytes, bytesToHex } from '@ethereumjs/util';
import { AbiCoder, Interface, type LogDescription, type Result } from 'ethers';
import { compileDataStorage } from './compile.mjs';

const GAS_LIMIT = 30_000_000n;
const TX_BASE_GAS = 21_000n;
const ERROR_SELECTOR = '0x08c379a0'; // Error(string)

export interface CallOutcome {
  ok: boolean;
  /** revert reason (the ledger error name) when ok is false */
  error?: string;
  returned?: Result;
  logs: LogDescription[];
  /** intrinsic transaction gas plus execution gas, as a dev chain would charge */
  gasTotal: bigint;
}

function intrinsicGas(data: Uint8Array): bigint {
  let gas = TX_BASE_GAS;
  for (const byte of data) gas += byte === 0 ? 4n : 16n;
  return gas;
}

/** One in-process EVM with a freshly deployed DataStorage contract. */
export class DevChain {
  private constructor(
    private readonly vm: VM,
    readonly contract: Address,
    readonly iface: Interface,
  ) {}

  static async create(): Promise<DevChain> {
    const { abi, bytecode } = compileDataStorage();
    // solc 0.8.25+ emits MCOPY; the chain must speak Cancun
    const vm = await VM.create({
      common: new Common({ chain: Chain.Mainnet, hardfork: Hardfork.Cancun }),
    });
    const deployer = Address.fromString('0x' + 'd0'.repeat(20));
    const deployed = await vm.evm.runCall({
      caller: deployer,
      data: hexToBytes(bytecode),
      gasLimit: GAS_LIMIT,
    });
    if (deployed.execResult.exceptionError || !deployed.createdAddress) {
      throw new Error(`deploy failed: ${deployed.execResult.exceptionError?.error}`);
    }
    return new DevChain(vm, deployed.createdAddress, new Interface(abi));
  }

  /** Submit one contract call with an impersonated caller (40-char hex, no 0x). */
  async callFrom(caller: string, fn: string, args: unknown[]): Promise<CallOutcome> {
    const data = hexToBytes(this.iface.encodeFunctionData(fn, args) as `0x${string}`);
    const result = await this.vm.evm.runCall({
      caller: Address.fromString('0x' + caller),
      to: this.contract,
      data,
      gasLimit: GAS_LIMIT,
    });
    const { exceptionError, returnValue, executionGasUsed, logs } = result.execResult;
    const gasTotal = intrinsicGas(data) + executionGasUsed;
    if (exceptionError) {
      return { ok: false, error: this.revertReason(exceptionError.error, returnValue), logs: [], gasTotal };
    }
    const parsed = (logs ?? []).map(([, topics, payload]) =>
      this.iface.parseLog({
        topics: topics.map((t) => bytesToHex(t)),
        data: bytesToHex(payload),
      }),
    );
    if (parsed.some((log) => log === null)) throw new Error('unparseable contract log');
    return {
      ok: true,
      returned: this.iface.decodeFunctionResult(fn, bytesToHex(returnValue)),
      logs: parsed as LogDescription[],
      gasTotal,
    };
  }

  private revertReason(kind: string, returnValue: Uint8Array): string {
    if (kind === 'revert' && bytesToHex(returnValue).startsWith(ERROR_SELECTOR)) {
      const [reason] = AbiCoder.defaultAbiCoder().decode(['string'], returnValue.slice(4));
      return reason as string;
    }
    return kind;
  }
}
