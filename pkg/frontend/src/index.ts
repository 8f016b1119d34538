export * from './protocol';
export * from './agents';
export * from './client';
